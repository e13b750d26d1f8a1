"""Deterministic synthetic offer corpora for tests and demos.

Small stand-ins for a real shop crawl: phone-like products with valid
EAN identifiers, bilingual offers, and head/long-tail skew. Everything
is a pure function of the seed.
"""

from __future__ import annotations

import json

from .pairs import MATCH, NON_MATCH, OfferPair, DatasetSplit
from .records import Offer
from .seeding import rng_for

_BRANDS = ["samsung", "apple", "nokia", "huawei", "xiaomi", "motorola"]
_LINES = ["galaxy", "iphone", "lumia", "mate", "redmi", "moto"]
_STORAGE = ["32gb", "64gb", "128gb", "256gb"]
_COLORS_EN = ["black", "white", "blue", "red"]
_COLORS_DE = ["schwarz", "weiss", "blau", "rot"]
_FILLER_EN = ["smartphone", "unlocked", "new", "warranty", "dual", "sim"]
_FILLER_DE = ["handy", "neu", "garantie", "ohne", "vertrag", "dual", "sim"]


def make_ean13(rng) -> str:
    digits = [rng.randrange(10) for _ in range(12)]
    checksum = sum(d * (3 if i % 2 else 1) for i, d in enumerate(digits))
    digits.append((10 - checksum % 10) % 10)
    return "".join(map(str, digits))


def _product_catalog(n_products: int, seed: int) -> list[dict]:
    products = []
    for i in range(n_products):
        rng = rng_for(seed, "product", i)
        brand = _BRANDS[i % len(_BRANDS)]
        line = _LINES[i % len(_LINES)]
        model = f"{line}{i:02d}"
        products.append({
            "seed_product": f"{brand} {model}",
            "brand": brand,
            "model": model,
            "storage": _STORAGE[i % len(_STORAGE)],
            "ean": make_ean13(rng),
            "mpn": f"{brand[:2].upper()}-{model.upper()}X",
        })
    return products


def _offer_for(product: dict, language: str, index: int, seed: int) -> Offer:
    rng = rng_for(seed, "offer", product["model"], language, index)
    colors = _COLORS_DE if language == "de" else _COLORS_EN
    filler = _FILLER_DE if language == "de" else _FILLER_EN
    color = rng.choice(colors)
    extra = " ".join(rng.sample(filler, 3))
    title = f"{product['brand'].title()} {product['model'].title()} {product['storage']} {color}"
    description = f"{extra} {product['brand']} {product['model']}"
    # some offers leak the identifier into the text, to exercise stripping
    if index % 2 == 0:
        description += f" EAN {product['ean']}"
    if index % 3 == 0:
        title += f" {product['mpn']}"
    offer_id = f"{language}-{product['model']}-{index:02d}"
    return Offer(
        offer_id=offer_id,
        language=language,
        source_host=f"shop{rng.randrange(20):02d}.example",
        title=title,
        description=description,
        ean=product["ean"] if index % 2 == 0 else None,
        gtin=product["ean"] if index % 2 == 1 else None,
        mpn=product["mpn"] if index % 3 != 1 else None,
        seed_product=product["seed_product"],
    )


def synthetic_corpus(n_products: int = 12, per_language: dict[str, int] | None = None,
                     seed: int = 7) -> list[Offer]:
    """Bilingual corpus: n_products clusters, each with per_language offers.

    Defaults give 12 products x (3 de + 2 en) = 60 offers.
    """
    if per_language is None:
        per_language = {"de": 3, "en": 2}
    offers = []
    for product in _product_catalog(n_products, seed):
        for language in sorted(per_language):
            for index in range(per_language[language]):
                offers.append(_offer_for(product, language, index, seed))
    offers.sort(key=lambda o: o.offer_id)
    return offers


def write_feed(offers, path) -> None:
    """Write offers in the line-delimited JSON feed format."""
    with open(path, "w", encoding="utf-8") as fh:
        for o in offers:
            record = {
                "offer_id": o.offer_id,
                "language": o.language,
                "source_host": o.source_host,
                "title": o.title,
                "description": o.description,
            }
            for key in ("gtin", "ean", "mpn", "seed_product"):
                value = getattr(o, key)
                if value:
                    record[key] = value
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def separable_matching_task(n_products: int = 30, offers_per_product: int = 8,
                            n_train: int = 400, n_test: int = 200, seed: int = 11,
                            language: str = "de"):
    """Linearly separable toy task: matches share a product-specific model
    token, non-matches do not.

    Returns (offers_by_id, train_pairs, test_split); train and test are
    class-balanced and pair-disjoint.
    """
    offers: dict[str, Offer] = {}
    members: list[list[str]] = []
    filler = _FILLER_DE if language == "de" else _FILLER_EN
    for i in range(n_products):
        rng = rng_for(seed, "sep-product", i)
        model = f"model{i:03d}"
        ids = []
        for j in range(offers_per_product):
            offer_id = f"{language}-sep-{i:03d}-{j}"
            extra = " ".join(rng.sample(filler, 3))
            offers[offer_id] = Offer(
                offer_id=offer_id,
                language=language,
                source_host="toy.example",
                title=f"phone {model} {extra}",
            )
            ids.append(offer_id)
        members.append(ids)

    positives = []
    negatives = []
    for i, ids in enumerate(members):
        for a_idx in range(len(ids)):
            for b_idx in range(a_idx + 1, len(ids)):
                positives.append(OfferPair.build(ids[a_idx], ids[b_idx], MATCH, 1.0, language))
        for step in (1, 2):
            other = members[(i + step) % n_products]
            for a, b in zip(ids, other):
                negatives.append(OfferPair.build(a, b, NON_MATCH, 0.0, language))

    rng_for(seed, "sep-shuffle", MATCH).shuffle(positives)
    rng_for(seed, "sep-shuffle", NON_MATCH).shuffle(negatives)
    need = (n_train + n_test) // 2
    if len(positives) < need or len(negatives) < need:
        raise ValueError("not enough generated pairs for the requested sizes")
    train = positives[: n_train // 2] + negatives[: n_train // 2]
    test_pairs = (positives[n_train // 2 : n_train // 2 + n_test // 2]
                  + negatives[n_train // 2 : n_train // 2 + n_test // 2])
    test = DatasetSplit.from_pairs("test", sorted(test_pairs, key=lambda p: p.pair_id), seed)
    return offers, sorted(train, key=lambda p: p.pair_id), test
