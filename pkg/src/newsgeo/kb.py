"""Cached clients for the WikiData and DBpedia knowledge bases.

Both clients share a persistent key-value cache so that a warmed cache makes
every lookup reproducible offline: with the ``cache-only`` policy no network
call is ever issued and a miss raises :class:`KbCacheMiss` naming the missing
key. The ``online-then-cache`` policy fetches through a rate-limited transport
and records results (including confirmed absences) for later runs.

Cache file format: one JSON object per line, ``{"source": s, "key": k,
"value": v}``, append-only with the last write winning. The format is
deliberately diff-friendly so recorded fixtures can live in version control.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import re
import threading
import time
import urllib.parse
from pathlib import Path
from typing import Any, Callable

logger = logging.getLogger(__name__)

ONLINE = "online-then-cache"
CACHE_ONLY = "cache-only"

WIKIDATA_ENTITY_URL = "https://www.wikidata.org/wiki/Special:EntityData/{qid}.json"
DBPEDIA_DATA_URL = "https://{lang}.dbpedia.org/data/{title}.json"

_QID_RE = re.compile(r"^Q[0-9]+$")

# Marker stored as a cache value when the remote endpoint confirmed absence.
_MISSING = {"__missing__": True}

Transport = Callable[[str, dict[str, Any] | None], Any]


class KbError(Exception):
    """Base class for knowledge-base access failures."""


class KbNotFound(KbError):
    """The entity or page does not exist (a confirmed, cacheable absence)."""


class KbCacheMiss(KbError):
    """A key is absent from the cache while the policy forbids network use."""

    def __init__(self, source: str, key: str):
        self.source = source
        self.key = key
        super().__init__(
            f"no cached entry for {source}:{key} (network policy is cache-only)"
        )


class KbRemoteError(KbError):
    """The remote endpoint kept failing after retries."""


class KbCache:
    """Append-only JSON key-value store, keyed by (source, key).

    Concurrent reads are safe; writes are serialized through a single lock and
    flushed immediately so parallel workers sharing one cache never observe a
    torn line.
    """

    FILENAME = "kb_cache.jsonl"

    def __init__(self, path: str | Path):
        path = Path(path)
        if path.suffix != ".jsonl":
            path.mkdir(parents=True, exist_ok=True)
            path = path / self.FILENAME
        self.path = path
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, str], Any] = {}
        if path.exists():
            with path.open(encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    self._entries[(record["source"], record["key"])] = record["value"]

    def __contains__(self, source_key: tuple[str, str]) -> bool:
        return source_key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, source: str, key: str) -> Any:
        return self._entries[(source, key)]

    def put(self, source: str, key: str, value: Any) -> None:
        line = json.dumps(
            {"source": source, "key": key, "value": value}, ensure_ascii=False
        )
        with self._lock:
            self._entries[(source, key)] = value
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")

    def keys(self) -> list[tuple[str, str]]:
        return sorted(self._entries)

    def export(self, path: str | Path) -> int:
        """Write a deduplicated snapshot, sorted by (source, key)."""
        with Path(path).open("w", encoding="utf-8") as handle:
            for source, key in self.keys():
                handle.write(
                    json.dumps(
                        {
                            "source": source,
                            "key": key,
                            "value": self._entries[(source, key)],
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        return len(self._entries)


class RateLimiter:
    """Enforces a minimum interval between calls across threads."""

    def __init__(self, per_second: float = 10.0):
        self._interval = 1.0 / per_second
        self._lock = threading.Lock()
        self._last = 0.0

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            delay = self._last + self._interval - now
            if delay > 0:
                time.sleep(delay)
            self._last = time.monotonic()


def default_transport(url: str, params: dict[str, Any] | None = None) -> Any:
    """GET a JSON document. Raises LookupError on HTTP 404."""
    import requests

    response = requests.get(
        url,
        params=params,
        headers={"User-Agent": "newsgeo/0.1 (news location detection pipeline)"},
        timeout=30,
    )
    if response.status_code == 404:
        raise LookupError(url)
    response.raise_for_status()
    return response.json()


def forbidden_transport(url: str, params: dict[str, Any] | None = None) -> Any:
    """Transport that fails on use; injected in tests to prove offline runs."""
    raise AssertionError(f"network access attempted in cache-only mode: {url}")


@dataclasses.dataclass
class WikidataItem:
    """A WikiData entity reduced to the properties the pipeline consumes.

    ``p31`` keeps the English label of each target class next to its id so
    that the city test (substring match on the class name) needs no further
    lookups.
    """

    qid: str
    labels: dict[str, str]
    p17: list[str]
    p31: list[tuple[str, str]]
    p131: list[str]

    def label(self, language: str = "en") -> str | None:
        if language in self.labels:
            return self.labels[language]
        if "en" in self.labels:
            return self.labels["en"]
        return next(iter(self.labels.values()), None)

    @staticmethod
    def from_json(d: dict[str, Any]) -> "WikidataItem":
        return WikidataItem(
            qid=d["qid"],
            labels=dict(d["labels"]),
            p17=list(d["p17"]),
            p31=[(qid, label) for qid, label in d["p31"]],
            p131=list(d["p131"]),
        )

    def to_json(self) -> dict[str, Any]:
        return dict(
            qid=self.qid,
            labels=self.labels,
            p17=self.p17,
            p31=[list(pair) for pair in self.p31],
            p131=self.p131,
        )


@dataclasses.dataclass
class DbpediaRecord:
    """A DBpedia page: properties (names lowercased at ingest), types, abstract."""

    title: str
    language: str
    properties: dict[str, list[str]]
    ontology_types: list[str]
    abstract: str | None = None

    @staticmethod
    def from_json(d: dict[str, Any]) -> "DbpediaRecord":
        return DbpediaRecord(
            title=d["title"],
            language=d["language"],
            properties={name: list(values) for name, values in d["properties"].items()},
            ontology_types=list(d["ontology_types"]),
            abstract=d.get("abstract"),
        )

    def to_json(self) -> dict[str, Any]:
        return dict(
            title=self.title,
            language=self.language,
            properties=self.properties,
            ontology_types=self.ontology_types,
            abstract=self.abstract,
        )


class _CachedClient:
    def __init__(
        self,
        cache: KbCache,
        policy: str = CACHE_ONLY,
        transport: Transport | None = None,
        rate_limiter: RateLimiter | None = None,
        retries: int = 3,
        backoff: float = 0.5,
    ):
        if policy not in (ONLINE, CACHE_ONLY):
            raise ValueError(f"unknown fetch policy {policy!r}")
        self.cache = cache
        self.policy = policy
        self.transport = transport or default_transport
        self.rate_limiter = rate_limiter or RateLimiter()
        self.retries = retries
        self.backoff = backoff

    def _lookup(self, source: str, key: str, url: str) -> Any:
        """Cache-through fetch of `url`, honouring the network policy."""
        if (source, key) in self.cache:
            value = self.cache.get(source, key)
            if value == _MISSING:
                raise KbNotFound(f"{source}:{key}")
            return value
        if self.policy == CACHE_ONLY:
            raise KbCacheMiss(source, key)
        try:
            value = self._fetch_remote(url)
        except KbNotFound:
            self.cache.put(source, key, _MISSING)
            raise KbNotFound(f"{source}:{key}")
        return value

    def _fetch_remote(self, url: str) -> Any:
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            self.rate_limiter.wait()
            try:
                return self.transport(url, None)
            except LookupError:
                raise KbNotFound(url)
            except Exception as exc:
                last_error = exc
                delay = self.backoff * (2**attempt)
                logger.warning("fetch failed (%s); retrying in %.1fs", exc, delay)
                time.sleep(delay)
        raise KbRemoteError(f"{url}: {last_error}")


class WikidataClient(_CachedClient):
    """Per-entity WikiData lookups with label resolution for target classes."""

    SOURCE = "wikidata"
    LABEL_SOURCE = "wikidata-label"

    def __init__(self, cache: KbCache, *, base_url: str = WIKIDATA_ENTITY_URL, **kw):
        super().__init__(cache, **kw)
        self.base_url = base_url

    def fetch(self, qid: str) -> WikidataItem:
        """Return the entity with country / instance-of / located-in populated."""
        if not _QID_RE.match(qid or ""):
            raise ValueError(f"malformed WikiData id {qid!r}")
        value = self._lookup(self.SOURCE, qid, self.base_url.format(qid=qid))
        if "qid" in value:
            return WikidataItem.from_json(value)
        # Raw entity payload fetched online: reduce, resolve class labels, cache.
        item = self._parse_entity(qid, value)
        self.cache.put(self.SOURCE, qid, item.to_json())
        return item

    def label(self, qid: str, language: str = "en") -> str | None:
        """English (or requested-language) label of an entity, cache-backed."""
        if (self.SOURCE, qid) in self.cache:
            value = self.cache.get(self.SOURCE, qid)
            if value != _MISSING:
                return WikidataItem.from_json(value).label(language)
        value = self._lookup(self.LABEL_SOURCE, qid, self.base_url.format(qid=qid))
        if "labels" in value and "entities" not in value:
            labels = value["labels"]
        else:
            labels = self._extract_labels(qid, value)
            self.cache.put(self.LABEL_SOURCE, qid, {"labels": labels})
        if language in labels:
            return labels[language]
        if "en" in labels:
            return labels["en"]
        return next(iter(labels.values()), None)

    def _parse_entity(self, qid: str, payload: dict[str, Any]) -> WikidataItem:
        entity = self._entity_node(qid, payload)
        labels = {
            lang: record["value"] for lang, record in entity.get("labels", {}).items()
        }
        claims = entity.get("claims", {})
        p17 = _claim_targets(claims.get("P17", []))
        p131 = _claim_targets(claims.get("P131", []))
        p31 = []
        for target in _claim_targets(claims.get("P31", [])):
            p31.append((target, self.label(target) or ""))
        return WikidataItem(qid=qid, labels=labels, p17=p17, p31=p31, p131=p131)

    def _extract_labels(self, qid: str, payload: dict[str, Any]) -> dict[str, str]:
        entity = self._entity_node(qid, payload)
        return {lang: record["value"] for lang, record in entity.get("labels", {}).items()}

    @staticmethod
    def _entity_node(qid: str, payload: dict[str, Any]) -> dict[str, Any]:
        entities = payload.get("entities", {})
        if qid in entities:
            return entities[qid]
        if entities:
            # Redirected entity: the payload is keyed by the canonical id.
            return next(iter(entities.values()))
        raise KbNotFound(qid)


def _claim_targets(claims: list[dict[str, Any]]) -> list[str]:
    targets = []
    for claim in claims:
        value = claim.get("mainsnak", {}).get("datavalue", {}).get("value")
        if isinstance(value, dict) and "id" in value:
            targets.append(value["id"])
    return targets


class DbpediaClient(_CachedClient):
    """Per-page DBpedia lookups against the language edition's data endpoint."""

    SOURCE = "dbpedia"

    def __init__(self, cache: KbCache, *, base_url: str = DBPEDIA_DATA_URL, **kw):
        super().__init__(cache, **kw)
        self.base_url = base_url

    def fetch(self, title: str, language: str, english_fallback: bool = True) -> DbpediaRecord:
        """Return the page record; falls back to the English edition on absence."""
        if not title:
            raise ValueError("empty DBpedia title")
        try:
            return self._fetch_edition(title, language)
        except KbNotFound:
            if english_fallback and language != "en":
                return self._fetch_edition(title, "en")
            raise

    def _fetch_edition(self, title: str, language: str) -> DbpediaRecord:
        key = f"{language}:{title}"
        url = self.base_url.format(
            lang=language, title=urllib.parse.quote(title.replace(" ", "_"))
        )
        value = self._lookup(self.SOURCE, key, url)
        if "title" in value and "properties" in value:
            return DbpediaRecord.from_json(value)
        record = _parse_dbpedia(title, language, value)
        self.cache.put(self.SOURCE, key, record.to_json())
        return record


def _parse_dbpedia(title: str, language: str, payload: dict[str, Any]) -> DbpediaRecord:
    """Reduce the raw data-endpoint payload to a DbpediaRecord."""
    suffix = "/resource/" + urllib.parse.quote(title.replace(" ", "_"))
    node = None
    for uri, predicates in payload.items():
        if uri.endswith(suffix):
            node = predicates
            break
    if node is None:
        raise KbNotFound(f"dbpedia:{language}:{title}")
    properties: dict[str, list[str]] = {}
    ontology_types: list[str] = []
    abstract_by_lang: dict[str, str] = {}
    for predicate, values in node.items():
        name = _local_name(predicate)
        if name == "type":
            for value in values:
                uri = value.get("value", "")
                if "dbpedia.org/ontology/" in uri:
                    ontology_types.append(_local_name(uri))
            continue
        rendered = []
        for value in values:
            if value.get("type") == "uri":
                rendered.append(_resource_title(value["value"]))
            else:
                text = str(value.get("value", ""))
                if name.lower() == "abstract":
                    abstract_by_lang[value.get("lang", "")] = text
                    continue
                rendered.append(text)
        if rendered:
            properties.setdefault(name.lower(), []).extend(rendered)
    abstract = (
        abstract_by_lang.get(language)
        or abstract_by_lang.get("en")
        or next(iter(abstract_by_lang.values()), None)
    )
    return DbpediaRecord(
        title=title,
        language=language,
        properties=properties,
        ontology_types=ontology_types,
        abstract=abstract,
    )


def _local_name(uri: str) -> str:
    return re.split(r"[/#]", uri)[-1]


def _resource_title(uri: str) -> str:
    return urllib.parse.unquote(_local_name(uri)).replace("_", " ")
