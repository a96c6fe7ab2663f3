"""Location inference over the knowledge base.

Three capabilities live here:

* deciding whether a category names a location (population / place ontology
  markers, or the country / located-in properties);
* completing any located entity to a (city, country) tuple, where the city is
  found by walking "located in the administrative territorial entity" edges
  until an item whose instance-of class names a city-like settlement;
* locating non-location entities through the geographic properties of their
  DBpedia page (the "birthPlace" route), so a document can be placed even
  when no location is mentioned explicitly.
"""

from __future__ import annotations

import dataclasses
import logging
import re
from typing import Any

from .kb import DbpediaClient, KbNotFound, KbRemoteError, WikidataClient, WikidataItem
from .linking import WikipediaLinker

logger = logging.getLogger(__name__)

_QID_RE = re.compile(r"^Q[0-9]+$")

# DBpedia ontology types / property names that mark a category as a location.
CATEGORY_LOCATION_MARKERS = frozenset(
    {"populationtotal", "populatedplace", "location", "place", "settlement"}
)

# Substrings of an instance-of class label that make the item itself a city.
CITY_CLASS_MARKERS = ("city", "capital", "municipality", "town", "village", "commune")

# Keywords scanned for in DBpedia property names, in priority order.
PROPERTY_KEYWORDS = ("location", "city", "country", "place")


class Unresolvable(Exception):
    """A knowledge-base lookup failed for this input; skip it and move on."""


@dataclasses.dataclass(frozen=True)
class LocationTuple:
    """The (city, country) output unit. A tuple always carries a country."""

    country: str
    country_qid: str | None = None
    city: str | None = None
    city_qid: str | None = None

    def validate(self) -> None:
        if not self.country:
            raise ValueError("location tuple without a country")
        if self.city_qid and not self.city:
            raise ValueError("city_qid without a city name")
        for qid in (self.country_qid, self.city_qid):
            if qid is not None and not _QID_RE.match(qid):
                raise ValueError(f"malformed WikiData id {qid!r}")

    @staticmethod
    def from_json(d: dict[str, Any]) -> "LocationTuple":
        return LocationTuple(
            country=d["country"],
            country_qid=d.get("country_qid"),
            city=d.get("city"),
            city_qid=d.get("city_qid"),
        )

    def to_json(self) -> dict[str, Any]:
        return dict(
            city=self.city,
            city_qid=self.city_qid,
            country=self.country,
            country_qid=self.country_qid,
        )


@dataclasses.dataclass(frozen=True)
class LocatedEntity:
    """A non-location entity together with the location inferred for it.

    `anchor` is the raw property value that seeded the resolution (for
    "birthPlace" = Mayfair it stays "Mayfair" even though the resolved city is
    London), so representations can render the full chain.
    """

    surface: str
    location: LocationTuple
    via_property: str
    source_qid: str | None = None
    anchor: str | None = None

    def location_text(self) -> str:
        return render_location(self.location, anchor=self.anchor)


def render_location(location: LocationTuple, anchor: str | None = None) -> str:
    """Render "City, Country" (or "Country"), prefixed by a distinct anchor."""
    parts = []
    seen = set()
    for part in (anchor, location.city, location.country):
        if part and part.casefold() not in seen:
            parts.append(part)
            seen.add(part.casefold())
    return ", ".join(parts)


def resolve_country(
    item: WikidataItem, wikidata: WikidataClient
) -> tuple[str, str] | None:
    """First country claim of the item as (label, qid); None without one.

    A country whose label cannot be resolved is returned with an empty label
    and flagged, rather than dropped.
    """
    if not item.p17:
        return None
    qid = item.p17[0]
    try:
        label = wikidata.label(qid)
    except (KbNotFound, KbRemoteError):
        label = None
    if not label:
        logger.warning("no label for country %s (via %s)", qid, item.qid)
        return "", qid
    return label, qid


def resolve_city(
    item: WikidataItem, wikidata: WikidataClient, max_depth: int = 10
) -> tuple[str, str] | None:
    """Find the city an item belongs to as (label, qid).

    The item itself is the city when any of its instance-of class labels
    contains a city-like word; otherwise each located-in target is tried in
    listed order, recursively, until a city is found, the chain runs out, or
    `max_depth` edges have been followed. A visited set terminates cycles.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    return _resolve_city(item, wikidata, max_depth, visited={item.qid})


def _resolve_city(
    item: WikidataItem, wikidata: WikidataClient, depth_left: int, visited: set[str]
) -> tuple[str, str] | None:
    if _is_city(item):
        return item.label() or item.qid, item.qid
    if depth_left == 0:
        return None
    for target in item.p131:
        if target in visited:
            continue
        visited.add(target)
        try:
            next_item = wikidata.fetch(target)
        except (KbNotFound, KbRemoteError):
            logger.warning("located-in target %s of %s unavailable", target, item.qid)
            continue
        found = _resolve_city(next_item, wikidata, depth_left - 1, visited)
        if found is not None:
            return found
    return None


def _is_city(item: WikidataItem) -> bool:
    for _, label in item.p31:
        folded = label.casefold()
        if any(marker in folded for marker in CITY_CLASS_MARKERS):
            return True
    return False


class Resolver:
    """Bundles the KB clients behind the location-resolution operations."""

    def __init__(
        self,
        wikidata: WikidataClient,
        dbpedia: DbpediaClient,
        linker: WikipediaLinker,
        max_depth: int = 10,
    ):
        self.wikidata = wikidata
        self.dbpedia = dbpedia
        self.linker = linker
        self.max_depth = max_depth

    def classify_category(self, category: str, language: str) -> LocationTuple | None:
        """The category's (city, country) tuple when it names a location.

        A category counts as a location when its DBpedia page carries any of
        the population / place markers, or its WikiData item has a country or
        located-in claim. Lookup failures raise Unresolvable so callers can
        skip the category.
        """
        try:
            link = self.linker.link(category, language)
        except (KbNotFound, KbRemoteError) as exc:
            raise Unresolvable(f"category {category!r}: {exc}") from exc
        if not link.qid:
            return None
        record = None
        if link.page_title:
            try:
                record = self.dbpedia.fetch(link.page_title, language)
            except (KbNotFound, KbRemoteError):
                record = None
        try:
            item = self.wikidata.fetch(link.qid)
        except (KbNotFound, KbRemoteError) as exc:
            raise Unresolvable(f"category {category!r}: {exc}") from exc
        if not self._has_location_markers(record, item):
            return None
        return self.locate_item(item)

    def classify_categories(self, categories: list[str], language: str) -> list[LocationTuple]:
        """Classify every category, skipping failures; duplicates removed."""
        found: list[LocationTuple] = []
        seen = set()
        for category in categories:
            try:
                location = self.classify_category(category, language)
            except Unresolvable as exc:
                logger.warning("skipping category: %s", exc)
                continue
            if location is None:
                continue
            key = (location.city_qid, location.country_qid, location.city, location.country)
            if key not in seen:
                seen.add(key)
                found.append(location)
        return found

    @staticmethod
    def _has_location_markers(record, item: WikidataItem) -> bool:
        if record is not None:
            for ontology_type in record.ontology_types:
                if ontology_type.casefold() in CATEGORY_LOCATION_MARKERS:
                    return True
            for name in record.properties:
                if name.casefold() in CATEGORY_LOCATION_MARKERS:
                    return True
        return bool(item.p17 or item.p131)

    def locate_item(self, item: WikidataItem) -> LocationTuple | None:
        """Complete an item to a LocationTuple; None when no country is reachable."""
        city = resolve_city(item, self.wikidata, self.max_depth)
        country = resolve_country(item, self.wikidata)
        if country is None and city is not None:
            # The item has no country claim of its own; borrow the city's.
            try:
                country = resolve_country(self.wikidata.fetch(city[1]), self.wikidata)
            except (KbNotFound, KbRemoteError):
                country = None
        if country is None:
            return None
        country_label, country_qid = country
        return LocationTuple(
            country=country_label or country_qid,
            country_qid=country_qid,
            city=(city[0] or city[1]) if city else None,
            city_qid=city[1] if city else None,
        )

    def locate_qid(self, qid: str) -> LocationTuple | None:
        """LocationTuple for a bare WikiData id; None when unlocatable."""
        try:
            item = self.wikidata.fetch(qid)
        except (KbNotFound, KbRemoteError):
            return None
        return self.locate_item(item)

    def implicit_locate(self, surface: str, language: str) -> LocatedEntity | None:
        """Locate a non-location entity through its DBpedia page properties.

        The page's property names are scanned for "location", "city",
        "country" and "place"; the first value of the best-matching property
        is linked back to WikiData and completed to a (city, country) tuple.
        """
        try:
            link = self.linker.link(surface, language)
        except (KbNotFound, KbRemoteError) as exc:
            logger.warning("linking failed for %r: %s", surface, exc)
            return None
        if not link.page_title:
            return None
        try:
            record = self.dbpedia.fetch(link.page_title, language)
        except (KbNotFound, KbRemoteError):
            return None
        match = _best_geographic_property(record.properties)
        if match is None:
            return None
        property_name, anchor = match
        try:
            anchor_link = self.linker.link(anchor, language)
        except (KbNotFound, KbRemoteError) as exc:
            logger.warning("linking failed for %r: %s", anchor, exc)
            return None
        if not anchor_link.qid:
            return None
        location = self.locate_qid(anchor_link.qid)
        if location is None:
            return None
        return LocatedEntity(
            surface=surface,
            location=location,
            via_property=property_name,
            source_qid=link.qid,
            anchor=anchor,
        )


def _best_geographic_property(
    properties: dict[str, list[str]]
) -> tuple[str, str] | None:
    """Pick the property whose name best indicates a location, and its value.

    Exact keyword names win in keyword order; otherwise any name containing a
    keyword, ordered by (keyword priority, name) for determinism.
    """
    for keyword in PROPERTY_KEYWORDS:
        values = properties.get(keyword)
        if values:
            return keyword, values[0]
    containing: list[tuple[int, str]] = []
    for name, values in properties.items():
        if not values:
            continue
        for priority, keyword in enumerate(PROPERTY_KEYWORDS):
            if keyword in name.casefold():
                containing.append((priority, name))
                break
    if not containing:
        return None
    _, name = min(containing, key=lambda pair: (pair[0], pair[1]))
    return name, properties[name][0]
