"""Parse offer feeds and schema.org-annotated HTML into validated offers.

Two input shapes are supported: a line-delimited JSON offer feed (one
object per line) and HTML pages carrying schema.org Product entities as
JSON-LD script blocks or microdata attributes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Iterable, Iterator

from .records import Offer, IngestError, RawDocument, collapse_whitespace, validate_offer

FEED_REQUIRED = ("offer_id", "language", "source_host", "title")
FEED_OPTIONAL = ("description", "gtin", "ean", "mpn", "seed_product")


@dataclass
class IngestResult:
    offers: list[Offer]
    errors: list[IngestError]


def _offer_from_mapping(obj: dict, ref: str) -> tuple[Offer | None, str | None]:
    for key in FEED_REQUIRED:
        if key not in obj or obj[key] is None or obj[key] == "":
            return None, f"missing required field: {key}"
    extras = {}
    for key in FEED_OPTIONAL:
        value = obj.get(key)
        if value is not None and not isinstance(value, str):
            return None, f"non-string optional field: {key}"
        if value:
            extras[key] = value
    offer = Offer(
        offer_id=str(obj["offer_id"]),
        language=str(obj["language"]).strip().lower(),
        source_host=str(obj["source_host"]),
        title=collapse_whitespace(str(obj["title"])),
        description=collapse_whitespace(extras.get("description", "")),
        gtin=extras.get("gtin"),
        ean=extras.get("ean"),
        mpn=extras.get("mpn"),
        seed_product=extras.get("seed_product"),
    )
    problems = validate_offer(offer)
    if problems:
        return None, "; ".join(problems)
    return offer, None


def parse_offer_feed(lines: Iterable[str]) -> IngestResult:
    """Parse a line-delimited JSON offer feed.

    Invalid records go to the error channel with their line number;
    records_in == offers_out + errors_out always holds.
    """
    offers: list[Offer] = []
    errors: list[IngestError] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        ref = f"line {lineno}"
        stripped = line.strip()
        if not stripped:
            errors.append(IngestError(ref, "blank line"))
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            errors.append(IngestError(ref, f"malformed record: {exc.msg}"))
            continue
        if not isinstance(obj, dict):
            errors.append(IngestError(ref, "malformed record: not an object"))
            continue
        offer, reason = _offer_from_mapping(obj, ref)
        if offer is None:
            errors.append(IngestError(ref, reason or "invalid record"))
            continue
        if offer.offer_id in seen_ids:
            raise ValueError(f"duplicate offer_id {offer.offer_id!r} at {ref}")
        seen_ids.add(offer.offer_id)
        offers.append(offer)
    return IngestResult(offers, errors)


# --------------------------------------------------------------------------- #
# schema.org extraction
# --------------------------------------------------------------------------- #

_PRODUCT_TYPES = {"product", "offer"}


def _iter_jsonld_entities(node) -> Iterator[dict]:
    """Walk a parsed JSON-LD value yielding Product/Offer-typed objects."""
    if isinstance(node, list):
        for item in node:
            yield from _iter_jsonld_entities(item)
    elif isinstance(node, dict):
        types = node.get("@type", "")
        if isinstance(types, str):
            types = [types]
        if any(str(t).lower() in _PRODUCT_TYPES for t in types):
            yield node
        for key in ("@graph", "itemListElement", "item", "offers", "hasVariant"):
            if key in node:
                yield from _iter_jsonld_entities(node[key])


class _HtmlScanner(HTMLParser):
    """Collects the page language, JSON-LD blocks, and microdata items."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.page_lang: str | None = None
        self.jsonld_blocks: list[str] = []
        self._in_jsonld = False
        self._jsonld_buf: list[str] = []
        # microdata: stack of (is_product, properties dict)
        self._item_stack: list[tuple[bool, dict]] = []
        self.microdata_items: list[dict] = []
        self._prop_capture: list[tuple[str, list[str]]] = []

    def handle_starttag(self, tag, attrs):
        attrs = dict(attrs)
        if tag == "html" and self.page_lang is None and attrs.get("lang"):
            self.page_lang = attrs["lang"].split("-")[0].lower()
        if tag == "script" and attrs.get("type", "").lower() == "application/ld+json":
            self._in_jsonld = True
            self._jsonld_buf = []
            return
        if "itemscope" in attrs:
            itemtype = (attrs.get("itemtype") or "").lower()
            is_product = any(t in itemtype for t in ("schema.org/product", "schema.org/offer"))
            props: dict = {}
            if is_product:
                self.microdata_items.append(props)
            self._item_stack.append((is_product, props))
        if "itemprop" in attrs and self._item_stack:
            name = attrs["itemprop"]
            content = attrs.get("content")
            target = self._nearest_item_props()
            if target is not None:
                if content is not None:
                    target.setdefault(name, content)
                else:
                    self._prop_capture.append((name, []))

    def _nearest_item_props(self) -> dict | None:
        for is_product, props in reversed(self._item_stack):
            if is_product:
                return props
        return None

    def handle_endtag(self, tag):
        if tag == "script" and self._in_jsonld:
            self._in_jsonld = False
            self.jsonld_blocks.append("".join(self._jsonld_buf))
            return
        if self._prop_capture:
            name, chunks = self._prop_capture.pop()
            target = self._nearest_item_props()
            if target is not None:
                target.setdefault(name, collapse_whitespace("".join(chunks)))

    def handle_data(self, data):
        if self._in_jsonld:
            self._jsonld_buf.append(data)
        for _, chunks in self._prop_capture:
            chunks.append(data)


def _first_str(value) -> str | None:
    if isinstance(value, (list, tuple)):
        value = value[0] if value else None
    if isinstance(value, (int, float)):
        value = str(value)
    if isinstance(value, str) and value.strip():
        return value.strip()
    return None


def _entity_to_offer(
    props: dict, doc: RawDocument, index: int, page_lang: str | None
) -> tuple[Offer | None, str | None]:
    title = _first_str(props.get("name"))
    if title is None:
        return None, "entity lacks a name"
    lang = _first_str(props.get("inLanguage")) or page_lang
    if lang is None:
        return None, "no language attribute on entity or page"
    gtin = _first_str(props.get("gtin13")) or _first_str(props.get("gtin"))
    offer = Offer(
        offer_id=f"{doc.doc_id}#{index}",
        language=lang.split("-")[0].lower(),
        source_host=doc.source_host,
        title=collapse_whitespace(title),
        description=collapse_whitespace(_first_str(props.get("description")) or ""),
        gtin=gtin,
        mpn=_first_str(props.get("mpn")),
    )
    problems = validate_offer(offer)
    if problems:
        return None, "; ".join(problems)
    return offer, None


def extract_offers_from_markup(doc: RawDocument) -> IngestResult:
    """Extract schema.org Product/Offer entities from one HTML document."""
    if doc.format_hint not in ("jsonld_html", "microdata_html"):
        raise ValueError(f"unsupported format_hint {doc.format_hint!r}")
    scanner = _HtmlScanner()
    scanner.feed(doc.body)
    scanner.close()

    offers: list[Offer] = []
    errors: list[IngestError] = []
    entities: list[dict] = []
    if doc.format_hint == "jsonld_html":
        for block in scanner.jsonld_blocks:
            try:
                parsed = json.loads(block)
            except json.JSONDecodeError as exc:
                errors.append(IngestError(doc.doc_id, f"unparseable JSON-LD: {exc.msg}"))
                continue
            entities.extend(_iter_jsonld_entities(parsed))
    else:
        entities = scanner.microdata_items

    for index, props in enumerate(entities):
        offer, reason = _entity_to_offer(props, doc, index, scanner.page_lang)
        if offer is None:
            errors.append(IngestError(f"{doc.doc_id}#{index}", reason or "invalid entity"))
        else:
            offers.append(offer)
    return IngestResult(offers, errors)


def ingest_documents(docs: Iterable[RawDocument]) -> IngestResult:
    """Extract offers from many documents, then sort by offer_id for handoff."""
    offers: list[Offer] = []
    errors: list[IngestError] = []
    seen: set[str] = set()
    for doc in docs:
        result = extract_offers_from_markup(doc)
        for offer in result.offers:
            if offer.offer_id in seen:
                raise ValueError(f"duplicate offer_id {offer.offer_id!r}")
            seen.add(offer.offer_id)
        offers.extend(result.offers)
        errors.extend(result.errors)
    offers.sort(key=lambda o: o.offer_id)
    return IngestResult(offers, errors)
