"""A small self-consistent world for offline runs: articles, gold, KB cache.

Ten articles across the five supported languages, every knowledge-base fact
they touch (entities, pages, link results), a gazetteer for the dictionary
NER provider, and a writer that lays all of it out as the on-disk tree the
command line consumes. Everything is deterministic, so runs against the
fixture tree are byte-reproducible.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .corpus import Article, GoldAnnotation, ParsedMention, save_corpus, save_gold
from .kb import DbpediaRecord, KbCache, WikidataItem
from .linking import LinkResult
from .locations import LocationTuple

_CITY = ("Q515", "city")
_TOWN = ("Q3957", "town")
_COUNTRY = ("Q6256", "country")
_HUMAN = ("Q5", "human")


def fixture_wikidata_items() -> dict[str, WikidataItem]:
    """Every entity the fixture articles can reach."""

    def item(qid, labels, p17=(), p31=(), p131=()):
        return WikidataItem(
            qid=qid, labels=dict(labels), p17=list(p17), p31=list(p31), p131=list(p131)
        )

    items = [
        item("Q90", {"en": "Paris", "fr": "Paris", "it": "Parigi"}, ["Q142"], [_CITY]),
        item("Q142", {"en": "France", "fr": "France", "it": "Francia"}, ["Q142"], [_COUNTRY]),
        item("Q84", {"en": "London", "it": "Londra"}, ["Q145"], [_CITY]),
        item("Q145", {"en": "United Kingdom", "it": "Regno Unito"}, ["Q145"], [_COUNTRY]),
        item("Q64", {"en": "Berlin", "de": "Berlin"}, ["Q183"], [_CITY]),
        item("Q183", {"en": "Germany", "de": "Deutschland"}, ["Q183"], [_COUNTRY]),
        item("Q2807", {"en": "Madrid", "es": "Madrid"}, ["Q29"], [_CITY]),
        item("Q29", {"en": "Spain", "es": "España"}, ["Q29"], [_COUNTRY]),
        item("Q16", {"en": "Canada", "es": "Canadá"}, ["Q16"], [_COUNTRY]),
        item("Q30", {"en": "United States"}, ["Q30"], [_COUNTRY]),
        item(
            "Q243",
            {"en": "Eiffel Tower", "fr": "Tour Eiffel"},
            ["Q142"],
            [("Q1440300", "observation tower")],
            ["Q90"],
        ),
        item("Q9682", {"en": "Elizabeth II"}, [], [_HUMAN]),
        # Mayfair -> City of Westminster -> London: a two-hop containment
        # chain whose first two stops are not cities themselves.
        item(
            "Q999101",
            {"en": "Mayfair"},
            ["Q145"],
            [("Q999110", "area of London")],
            ["Q999102"],
        ),
        item(
            "Q999102",
            {"en": "City of Westminster"},
            ["Q145"],
            [("Q999111", "London borough")],
            ["Q84"],
        ),
        # Greenville sits below a district/county pair that reference each
        # other, exercising the cycle guard on the way to a town.
        item("Q999103", {"en": "Greenville"}, ["Q16"], [_TOWN]),
        item(
            "Q999104",
            {"en": "Maple District"},
            ["Q16"],
            [("Q999113", "district")],
            ["Q999105"],
        ),
        item(
            "Q999105",
            {"en": "Maple County"},
            ["Q16"],
            [("Q999114", "county")],
            ["Q999104", "Q999103"],
        ),
        item("Q7163", {"en": "Politics"}, [], [("Q11862829", "academic discipline")]),
    ]
    return {entry.qid: entry for entry in items}


# Surface form -> (page title, entity id), per language. Doubles as the link
# cache and as the inventory of DBpedia pages each language edition carries.
FIXTURE_LINKS: dict[str, dict[str, tuple[str, str]]] = {
    "en": {
        "Paris": ("Paris", "Q90"),
        "France": ("France", "Q142"),
        "London": ("London", "Q84"),
        "United Kingdom": ("United Kingdom", "Q145"),
        "Berlin": ("Berlin", "Q64"),
        "Germany": ("Germany", "Q183"),
        "Madrid": ("Madrid", "Q2807"),
        "Spain": ("Spain", "Q29"),
        "Canada": ("Canada", "Q16"),
        "U.S.A.": ("United States", "Q30"),
        "the United States": ("United States", "Q30"),
        "United States": ("United States", "Q30"),
        "Queen Elizabeth II": ("Queen Elizabeth II", "Q9682"),
        "Eiffel Tower": ("Eiffel Tower", "Q243"),
        "Mayfair": ("Mayfair", "Q999101"),
        "Greenville": ("Greenville", "Q999103"),
        "Politics": ("Politics", "Q7163"),
    },
    "fr": {
        "Paris": ("Paris", "Q90"),
        "France": ("France", "Q142"),
        "Berlin": ("Berlin", "Q64"),
        "Allemagne": ("Allemagne", "Q183"),
        "Madrid": ("Madrid", "Q2807"),
        "Tour Eiffel": ("Tour Eiffel", "Q243"),
        "Politics": ("Politics", "Q7163"),
    },
    "de": {
        "Berlin": ("Berlin", "Q64"),
        "Deutschland": ("Deutschland", "Q183"),
        "Madrid": ("Madrid", "Q2807"),
        "Spanien": ("Spanien", "Q29"),
        "Politics": ("Politics", "Q7163"),
    },
    "es": {
        "Madrid": ("Madrid", "Q2807"),
        "España": ("España", "Q29"),
        "Canadá": ("Canadá", "Q16"),
        "Berlin": ("Berlin", "Q64"),
        "Politics": ("Politics", "Q7163"),
    },
    "it": {
        "Parigi": ("Parigi", "Q90"),
        "Francia": ("Francia", "Q142"),
        "Londra": ("Londra", "Q84"),
        "Regno Unito": ("Regno Unito", "Q145"),
        "Politics": ("Politics", "Q7163"),
    },
}

# Page title -> (kind, detail) driving the synthetic DBpedia record content.
_PAGES: dict[str, tuple[str, str]] = {
    "Paris": ("city", "France"),
    "London": ("city", "United Kingdom"),
    "Berlin": ("city", "Germany"),
    "Madrid": ("city", "Spain"),
    "Parigi": ("city", "Francia"),
    "Londra": ("city", "Regno Unito"),
    "Greenville": ("city", "Canada"),
    "Mayfair": ("area", "United Kingdom"),
    "France": ("country", "Paris"),
    "Germany": ("country", "Berlin"),
    "Spain": ("country", "Madrid"),
    "United Kingdom": ("country", "London"),
    "Canada": ("country", "Ottawa"),
    "United States": ("country", "Washington, D.C."),
    "Deutschland": ("country", "Berlin"),
    "Allemagne": ("country", "Berlin"),
    "Spanien": ("country", "Madrid"),
    "España": ("country", "Madrid"),
    "Canadá": ("country", "Ottawa"),
    "Francia": ("country", "Parigi"),
    "Regno Unito": ("country", "Londra"),
    "Queen Elizabeth II": ("person", "Mayfair"),
    "Eiffel Tower": ("building", "Paris"),
    "Tour Eiffel": ("building", "Paris"),
    "Politics": ("topic", ""),
}


def _page_record(title: str, language: str) -> DbpediaRecord:
    kind, detail = _PAGES[title]
    if kind == "city":
        return DbpediaRecord(
            title=title,
            language=language,
            properties={"country": [detail], "populationtotal": ["1000000"]},
            ontology_types=["Place", "PopulatedPlace", "Settlement", "City"],
            abstract=f"{title} is a major city of {detail}.",
        )
    if kind == "area":
        return DbpediaRecord(
            title=title,
            language=language,
            properties={"country": [detail]},
            ontology_types=["Place"],
            abstract=f"{title} is an affluent area of {detail}.",
        )
    if kind == "country":
        return DbpediaRecord(
            title=title,
            language=language,
            properties={"capital": [detail], "populationtotal": ["50000000"]},
            ontology_types=["Place", "PopulatedPlace", "Country"],
            abstract=f"{title} is a sovereign country.",
        )
    if kind == "person":
        return DbpediaRecord(
            title=title,
            language=language,
            properties={"birthplace": [detail], "occupation": ["Monarch"]},
            ontology_types=["Agent", "Person", "Royalty"],
            abstract=f"{title} reigned for decades and was born in {detail}.",
        )
    if kind == "building":
        return DbpediaRecord(
            title=title,
            language=language,
            properties={"location": [detail], "architect": ["Stephen Sauvestre"]},
            ontology_types=["ArchitecturalStructure", "Building"],
            abstract=f"{title} is a wrought-iron lattice tower in {detail}.",
        )
    return DbpediaRecord(
        title=title,
        language=language,
        properties={"field": ["Social science"]},
        ontology_types=[],
        abstract=f"{title} is the set of activities associated with group decisions.",
    )


def fixture_dbpedia_records() -> dict[tuple[str, str], DbpediaRecord]:
    """One record per (language, page title) the fixture linker can reach."""
    records = {}
    for language, links in FIXTURE_LINKS.items():
        for title, _ in links.values():
            records[(language, title)] = _page_record(title, language)
    return records


def fixture_gazetteer() -> dict[str, str]:
    return {
        "Paris": "LOC",
        "France": "LOC",
        "London": "LOC",
        "United Kingdom": "LOC",
        "Berlin": "LOC",
        "Deutschland": "LOC",
        "Allemagne": "LOC",
        "Madrid": "LOC",
        "Spanien": "LOC",
        "España": "LOC",
        "Canadá": "LOC",
        "Parigi": "LOC",
        "Francia": "LOC",
        "Londra": "LOC",
        "Regno Unito": "LOC",
        "Queen Elizabeth II": "person",
        "Eiffel Tower": "misc",
        "Tour Eiffel": "misc",
    }


def _article(
    article_id: str,
    language: str,
    title: str,
    body: str,
    categories: list[str],
    mention_specs: list[tuple[str, str]],
) -> Article:
    """Assemble an article, computing mention offsets from reading order."""
    text = title + "\n" + body
    cursor: dict[str, int] = {}
    mentions = []
    for surface, qid in mention_specs:
        start = text.index(surface, cursor.get(surface, 0))
        mentions.append(
            ParsedMention(surface=surface, start=start, end=start + len(surface), qid=qid)
        )
        cursor[surface] = start + len(surface)
    mentions.sort(key=lambda m: m.start)
    article = Article(
        id=article_id,
        language=language,
        title=title,
        text=text,
        categories=categories,
        mentions=mentions,
        source_url=f"https://news.example/{article_id}",
    )
    article.validate()
    return article


def fixture_articles() -> list[Article]:
    return [
        _article(
            "en-001",
            "en",
            "Climate summit opens in Paris",
            "Delegates gathered in Paris on Monday. The talks were held near the "
            "Eiffel Tower. Observers from Berlin attended the closing session.",
            ["Paris", "Politics"],
            [("Paris", "Q90"), ("Paris", "Q90"), ("Eiffel Tower", "Q243"), ("Berlin", "Q64")],
        ),
        _article(
            "en-002",
            "en",
            "Queen Elizabeth II visits London schools",
            "Queen Elizabeth II met pupils across London. The visit celebrates "
            "education across the United Kingdom.",
            ["London", "Politics"],
            [("Queen Elizabeth II", "Q9682"), ("London", "Q84"), ("United Kingdom", "Q145")],
        ),
        _article(
            "fr-001",
            "fr",
            "Un sommet international à Paris",
            "Les dirigeants se sont réunis à Paris mardi. La rencontre a eu lieu "
            "près de la Tour Eiffel.",
            ["Paris", "Politics"],
            [("Paris", "Q90"), ("Tour Eiffel", "Q243")],
        ),
        _article(
            "fr-002",
            "fr",
            "Berlin accueille une conférence européenne",
            "La conférence s'est ouverte à Berlin, avec des délégations venues de "
            "toute l'Allemagne et des invités de Madrid.",
            ["Berlin", "Politics"],
            [("Berlin", "Q64"), ("Allemagne", "Q183"), ("Madrid", "Q2807")],
        ),
        _article(
            "de-001",
            "de",
            "Gipfeltreffen in Berlin eröffnet",
            "Die Delegierten trafen sich in Berlin. Gastgeber war die Regierung "
            "von Deutschland.",
            ["Berlin", "Politics"],
            [("Berlin", "Q64"), ("Deutschland", "Q183")],
        ),
        _article(
            "de-002",
            "de",
            "Messe in Madrid zieht Besucher an",
            "Aussteller aus ganz Spanien kamen nach Madrid, viele davon nach "
            "einem Auftakt in Berlin.",
            ["Madrid", "Politics"],
            [("Spanien", "Q29"), ("Madrid", "Q2807"), ("Berlin", "Q64")],
        ),
        _article(
            "es-001",
            "es",
            "Madrid celebra una cumbre regional",
            "Los ministros llegaron a Madrid desde toda España, tras una escala "
            "en Berlin.",
            ["Madrid", "Politics"],
            [("Madrid", "Q2807"), ("España", "Q29"), ("Berlin", "Q64")],
        ),
        _article(
            "es-002",
            "es",
            "Canadá firma un acuerdo comercial",
            "El acuerdo fue firmado por el gobierno de Canadá esta semana.",
            ["Canadá", "Politics"],
            [("Canadá", "Q16")],
        ),
        _article(
            "it-001",
            "it",
            "Parigi ospita un vertice internazionale",
            "I delegati si sono riuniti a Parigi. L'incontro si è svolto in "
            "Francia, con una delegazione arrivata da Londra.",
            ["Parigi", "Politics"],
            [("Parigi", "Q90"), ("Francia", "Q142"), ("Londra", "Q84")],
        ),
        _article(
            "it-002",
            "it",
            "Londra annuncia nuovi investimenti",
            "Il governo ha presentato il piano a Londra, capitale del Regno Unito.",
            ["Londra", "Politics"],
            [("Londra", "Q84"), ("Regno Unito", "Q145")],
        ),
    ]


def fixture_gold() -> list[GoldAnnotation]:
    paris = LocationTuple(city="Paris", city_qid="Q90", country="France", country_qid="Q142")
    london = LocationTuple(
        city="London", city_qid="Q84", country="United Kingdom", country_qid="Q145"
    )
    berlin = LocationTuple(
        city="Berlin", city_qid="Q64", country="Germany", country_qid="Q183"
    )
    madrid = LocationTuple(city="Madrid", city_qid="Q2807", country="Spain", country_qid="Q29")
    canada = LocationTuple(country="Canada", country_qid="Q16")
    by_article = {
        "en-001": (paris,),
        "en-002": (london,),
        "fr-001": (paris,),
        "fr-002": (berlin,),
        "de-001": (berlin,),
        "de-002": (madrid,),
        "es-001": (madrid,),
        "es-002": (canada,),
        "it-001": (paris,),
        "it-002": (london,),
    }
    return [
        GoldAnnotation(article_id=article_id, locations=locations)
        for article_id, locations in by_article.items()
    ]


def build_fixture_cache(path: str | Path) -> KbCache:
    """Write a warm knowledge-base cache covering the whole fixture world."""
    cache = KbCache(path)
    for qid, item in sorted(fixture_wikidata_items().items()):
        cache.put("wikidata", qid, item.to_json())
    for (language, title), record in sorted(fixture_dbpedia_records().items()):
        cache.put("dbpedia", f"{language}:{title}", record.to_json())
    for language in sorted(FIXTURE_LINKS):
        for surface, (page_title, qid) in sorted(FIXTURE_LINKS[language].items()):
            result = LinkResult(
                surface=surface,
                language=language,
                page_title=page_title,
                qid=qid,
                rank_in_results=0,
            )
            cache.put("wplink", f"{language}:{surface}", result.to_json())
    return cache


def fixture_config() -> dict[str, Any]:
    """The pipeline configuration the fixture tree ships with."""
    return {
        "cache": "kb_cache.jsonl",
        "corpus": {
            lang: f"articles_{lang}.jsonl" for lang in ("de", "en", "es", "fr", "it")
        },
        "gold": "gold.jsonl",
        "ner_providers": ["gazetteer:gazetteer.json"],
        "embedder": "mock:16",
        "chunking_mode": "average_subdivisions",
        "representation_modes": ["only_locations", "located_non_locations"],
        "network": "cache-only",
        "seed": 13,
        "workers": 1,
        "max_depth": 10,
        "loss": {
            "loss": "contrastive",
            "batch_size": 4,
            "epochs": 4,
            "early_stop_patience": 1,
            "validation_fraction": 0.3,
            "seed": 13,
        },
    }


def write_fixture_tree(root: str | Path) -> dict[str, Path]:
    """Materialize the fixture world as the on-disk layout the CLI expects."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    articles = fixture_articles()
    for language in ("de", "en", "es", "fr", "it"):
        path = root / f"articles_{language}.jsonl"
        save_corpus([a for a in articles if a.language == language], path)
        paths[f"articles_{language}"] = path
    paths["gold"] = root / "gold.jsonl"
    save_gold(fixture_gold(), paths["gold"])
    paths["gazetteer"] = root / "gazetteer.json"
    paths["gazetteer"].write_text(
        json.dumps(fixture_gazetteer(), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    cache_path = root / "kb_cache.jsonl"
    if cache_path.exists():
        cache_path.unlink()
    build_fixture_cache(cache_path)
    paths["cache"] = cache_path
    paths["config"] = root / "config.json"
    paths["config"].write_text(
        json.dumps(fixture_config(), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return paths
