"""Pipeline configuration: JSON file, defaults, and component registries.

A configuration names its inputs (per-language corpus files, gold file, KB
cache) and its components by id strings: embedders as ``kind:argument``
(``mock:16``, ``sentence-transformers:paraphrase-multilingual-mpnet-base-v2``)
and NER providers likewise (``gazetteer:path/to/entries.json``,
``spacy:en_core_web_sm``). Relative paths are resolved against the config
file's directory; the cache directory can also come from the
``NEWSGEO_CACHE_DIR`` environment variable. Precedence is flags > config file
> defaults.
"""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path
from typing import Any

from .embedding import (
    AVERAGE,
    TRUNCATE,
    ChunkingConfig,
    EmbeddingProvider,
    MockEmbedder,
    SentenceTransformerProvider,
)
from .kb import CACHE_ONLY, ONLINE, DbpediaClient, KbCache, WikidataClient
from .linking import WikipediaLinker
from .locations import Resolver
from .ner import GazetteerNer, NerProvider, SpacyNer
from .ranking import LOCATED_NON_LOCATIONS, ONLY_LOCATIONS, REPRESENTATION_MODES
from .training import LossConfig

CACHE_DIR_ENV = "NEWSGEO_CACHE_DIR"

# "online" is accepted as shorthand for the full policy name.
_NETWORK_ALIASES = {"online": ONLINE, ONLINE: ONLINE, CACHE_ONLY: CACHE_ONLY}


class ConfigError(ValueError):
    """Configuration rejected; carries one message per offending field."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclasses.dataclass
class PipelineConfig:
    corpus: dict[str, str] = dataclasses.field(default_factory=dict)
    gold: str | None = None
    cache: str | None = None
    ner_providers: list[str] = dataclasses.field(default_factory=list)
    embedder: str = "mock:16"
    chunking_mode: str = AVERAGE
    segmenter: str = "rule"
    representation_modes: list[str] = dataclasses.field(
        default_factory=lambda: [ONLY_LOCATIONS, LOCATED_NON_LOCATIONS]
    )
    network: str = CACHE_ONLY
    seed: int = 13
    workers: int = 1
    max_depth: int = 10
    loss: LossConfig = dataclasses.field(default_factory=LossConfig)

    def problems(self) -> list[str]:
        """Field-level validation messages; empty means the config is usable."""
        found: list[str] = []
        for language, path in self.corpus.items():
            if not Path(path).exists():
                found.append(f"corpus[{language}]: no such file {path!r}")
        if self.gold is not None and not Path(self.gold).exists():
            found.append(f"gold: no such file {self.gold!r}")
        if self.network not in _NETWORK_ALIASES:
            found.append(
                f"network: {self.network!r} is not one of "
                f"{sorted(set(_NETWORK_ALIASES))}"
            )
        if self.chunking_mode not in (TRUNCATE, AVERAGE):
            found.append(f"chunking_mode: unknown mode {self.chunking_mode!r}")
        for mode in self.representation_modes:
            if mode not in REPRESENTATION_MODES:
                found.append(f"representation_modes: unknown mode {mode!r}")
        if not self.representation_modes:
            found.append("representation_modes: at least one mode required")
        if self.workers < 1:
            found.append("workers: must be >= 1")
        if self.max_depth < 1:
            found.append("max_depth: must be >= 1")
        kind = self.embedder.split(":", 1)[0]
        if kind not in ("mock", "sentence-transformers"):
            found.append(f"embedder: unknown provider kind {kind!r}")
        for spec in self.ner_providers:
            if spec.split(":", 1)[0] not in ("gazetteer", "spacy"):
                found.append(f"ner_providers: unknown provider kind {spec!r}")
        try:
            self.loss.validate()
        except ValueError as exc:
            found.append(f"loss: {exc}")
        return found

    def validate(self) -> None:
        found = self.problems()
        if found:
            raise ConfigError(found)

    @property
    def network_policy(self) -> str:
        return _NETWORK_ALIASES.get(self.network, self.network)

    def chunking(self) -> ChunkingConfig:
        return ChunkingConfig(mode=self.chunking_mode, segmenter=self.segmenter)

    def cache_path(self) -> Path:
        path = self.cache or os.environ.get(CACHE_DIR_ENV) or "kb_cache"
        return Path(path)

    def build_cache(self) -> KbCache:
        return KbCache(self.cache_path())

    def build_resolver(self, cache: KbCache | None = None) -> Resolver:
        cache = cache or self.build_cache()
        policy = self.network_policy
        return Resolver(
            wikidata=WikidataClient(cache, policy=policy),
            dbpedia=DbpediaClient(cache, policy=policy),
            linker=WikipediaLinker(cache, policy=policy),
            max_depth=self.max_depth,
        )

    def build_embedder(self) -> EmbeddingProvider:
        kind, _, argument = self.embedder.partition(":")
        if kind == "mock":
            dimension = int(argument) if argument else 16
            return MockEmbedder(dimension=dimension, seed=self.seed)
        return SentenceTransformerProvider(argument or "paraphrase-multilingual-mpnet-base-v2")

    def build_ner_providers(self) -> list[NerProvider]:
        providers: list[NerProvider] = []
        for spec in self.ner_providers:
            kind, _, argument = spec.partition(":")
            if kind == "gazetteer":
                entries = json.loads(Path(argument).read_text(encoding="utf-8"))
                providers.append(GazetteerNer(entries))
            else:
                providers.append(SpacyNer(argument or "en_core_web_sm"))
        return providers

    @staticmethod
    def from_json(d: dict[str, Any]) -> "PipelineConfig":
        known = {field.name for field in dataclasses.fields(PipelineConfig)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError([f"{name}: unknown configuration field" for name in unknown])
        values = dict(d)
        if "loss" in values and isinstance(values["loss"], dict):
            values["loss"] = LossConfig(**values["loss"])
        return PipelineConfig(**values)

    def to_json(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["loss"] = self.loss.to_json()
        return d


def load_config(path: str | Path) -> PipelineConfig:
    """Read a JSON config file, resolving relative paths against its parent."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError([f"config: no such file {str(path)!r}"])
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON ({exc})"])
    config = PipelineConfig.from_json(raw)
    base = path.parent
    config.corpus = {
        language: str(_resolve(base, corpus_path))
        for language, corpus_path in config.corpus.items()
    }
    if config.gold:
        config.gold = str(_resolve(base, config.gold))
    if config.cache:
        config.cache = str(_resolve(base, config.cache))
    config.ner_providers = [
        _resolve_provider_spec(base, spec) for spec in config.ner_providers
    ]
    return config


def _resolve(base: Path, path: str) -> Path:
    candidate = Path(path)
    return candidate if candidate.is_absolute() else base / candidate


def _resolve_provider_spec(base: Path, spec: str) -> str:
    kind, _, argument = spec.partition(":")
    if kind == "gazetteer" and argument:
        return f"{kind}:{_resolve(base, argument)}"
    return spec
