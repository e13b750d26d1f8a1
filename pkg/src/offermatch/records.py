"""Core record types shared across the pipeline."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

_LANG_RE = re.compile(r"^[a-z]{2}$")
_WS_RE = re.compile(r"\s+")


def collapse_whitespace(text: str) -> str:
    """Collapse runs of whitespace/control characters to single spaces and trim."""
    return _WS_RE.sub(" ", text).strip()


@dataclass(frozen=True)
class RawDocument:
    """One raw input page or feed chunk prior to offer extraction."""

    doc_id: str
    source_host: str
    body: str
    format_hint: str  # jsonld_html | microdata_html | offer_feed


@dataclass(frozen=True)
class Offer:
    """A single product offer from one shop."""

    offer_id: str
    language: str
    source_host: str
    title: str
    description: str = ""
    gtin: str | None = None
    ean: str | None = None
    mpn: str | None = None
    seed_product: str | None = None

    def has_identifier(self) -> bool:
        return any(v for v in (self.gtin, self.ean, self.mpn))

    def raw_identifiers(self) -> list[tuple[str, str]]:
        """(kind, raw value) for every identifier field that is set."""
        out = []
        if self.gtin:
            out.append(("GTIN", self.gtin))
        if self.ean:
            out.append(("EAN", self.ean))
        if self.mpn:
            out.append(("MPN", self.mpn))
        return out

    def text(self) -> str:
        """Title and description concatenated into one matching string."""
        if self.description:
            return collapse_whitespace(self.title + " " + self.description)
        return collapse_whitespace(self.title)


@dataclass(frozen=True)
class IngestError:
    """One rejected input record, reported on the error channel."""

    input_ref: str
    reason: str


def validate_offer(offer: Offer) -> list[str]:
    """Return the list of violated offer invariants (empty means valid)."""
    problems = []
    if not offer.offer_id:
        problems.append("empty offer_id")
    if not collapse_whitespace(offer.title):
        problems.append("empty title")
    if not _LANG_RE.match(offer.language or ""):
        problems.append("invalid language code")
    return problems


def normalized_offer(offer: Offer) -> Offer:
    """Copy of the offer with whitespace collapsed in the text fields."""
    return replace(
        offer,
        title=collapse_whitespace(offer.title),
        description=collapse_whitespace(offer.description),
    )
