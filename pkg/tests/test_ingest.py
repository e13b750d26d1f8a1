import json

import pytest

from offermatch.ingest import extract_offers_from_markup, parse_offer_feed
from offermatch.records import Offer, RawDocument, validate_offer


def feed_line(**overrides):
    record = {
        "offer_id": "o1",
        "language": "de",
        "source_host": "shop.example",
        "title": "Galaxy S8 64GB",
        "ean": "8806088697802",
    }
    record.update(overrides)
    return json.dumps(record)


class TestFeedParsing:
    def test_well_formed_record(self):
        result = parse_offer_feed([feed_line()])
        assert len(result.offers) == 1 and not result.errors
        offer = result.offers[0]
        assert offer.title == "Galaxy S8 64GB"
        assert offer.language == "de"
        assert offer.ean == "8806088697802"

    def test_missing_title(self):
        result = parse_offer_feed([feed_line(title=None)])
        assert result.offers == []
        assert len(result.errors) == 1
        assert result.errors[0].reason == "missing required field: title"

    def test_empty_stream(self):
        result = parse_offer_feed([])
        assert result.offers == [] and result.errors == []

    def test_malformed_json_goes_to_error_channel(self):
        result = parse_offer_feed(["{not json"])
        assert result.offers == []
        assert "malformed record" in result.errors[0].reason
        assert result.errors[0].input_ref == "line 1"

    def test_unknown_language_code(self):
        result = parse_offer_feed([feed_line(language="deu")])
        assert result.offers == []
        assert "invalid language code" in result.errors[0].reason

    def test_count_conservation(self):
        lines = [feed_line(offer_id=f"o{i}") for i in range(5)]
        lines.insert(2, "broken")
        lines.insert(4, feed_line(offer_id="bad", title="  "))
        result = parse_offer_feed(lines)
        assert len(result.offers) + len(result.errors) == len(lines)

    def test_duplicate_offer_id_is_hard_error(self):
        with pytest.raises(ValueError, match="duplicate offer_id"):
            parse_offer_feed([feed_line(), feed_line()])

    def test_deterministic(self):
        lines = [feed_line(offer_id=f"o{i}", title=f"Phone {i}") for i in range(10)]
        first = parse_offer_feed(lines)
        second = parse_offer_feed(lines)
        assert first.offers == second.offers
        assert first.errors == second.errors

    def test_whitespace_collapsed(self):
        result = parse_offer_feed([feed_line(title="Galaxy\t S8\n 64GB ")])
        assert result.offers[0].title == "Galaxy S8 64GB"


JSONLD_PAGE = """<html><head>
<script type="application/ld+json">
{"@context": "https://schema.org", "@type": "Product",
 "name": "Pixel 4a", "gtin13": "0193575006741", "inLanguage": "en"}
</script>
</head><body></body></html>"""


class TestMarkupExtraction:
    def test_jsonld_product(self):
        doc = RawDocument("d1", "shop.example", JSONLD_PAGE, "jsonld_html")
        result = extract_offers_from_markup(doc)
        assert len(result.offers) == 1
        offer = result.offers[0]
        assert offer.title == "Pixel 4a"
        assert offer.gtin == "0193575006741"
        assert offer.language == "en"

    def test_two_products_doc_order(self):
        body = """<html lang="de"><script type="application/ld+json">
        [{"@type": "Product", "name": "Erstes"}, {"@type": "Product", "name": "Zweites"}]
        </script></html>"""
        doc = RawDocument("d2", "shop.example", body, "jsonld_html")
        result = extract_offers_from_markup(doc)
        assert [o.title for o in result.offers] == ["Erstes", "Zweites"]

    def test_product_without_name_is_per_entity_error(self):
        body = """<html lang="de"><script type="application/ld+json">
        {"@type": "Product", "description": "namenlos"}
        </script></html>"""
        doc = RawDocument("d3", "shop.example", body, "jsonld_html")
        result = extract_offers_from_markup(doc)
        assert result.offers == []
        assert len(result.errors) == 1

    def test_zero_entities_is_not_an_error(self):
        doc = RawDocument("d4", "shop.example", "<html><body>hi</body></html>", "jsonld_html")
        result = extract_offers_from_markup(doc)
        assert result.offers == [] and result.errors == []

    def test_unparseable_jsonld_is_recoverable(self):
        body = ('<html lang="en"><script type="application/ld+json">{oops</script>'
                '<script type="application/ld+json">{"@type": "Product", "name": "Ok"}'
                "</script></html>")
        doc = RawDocument("d5", "shop.example", body, "jsonld_html")
        result = extract_offers_from_markup(doc)
        assert [o.title for o in result.offers] == ["Ok"]
        assert len(result.errors) == 1

    def test_language_from_page_attribute(self):
        body = """<html lang="de-DE"><script type="application/ld+json">
        {"@type": "Product", "name": "Handy", "mpn": "AB-1234"}
        </script></html>"""
        doc = RawDocument("d6", "shop.example", body, "jsonld_html")
        result = extract_offers_from_markup(doc)
        assert result.offers[0].language == "de"
        assert result.offers[0].mpn == "AB-1234"

    def test_no_language_anywhere_is_error(self):
        body = """<html><script type="application/ld+json">
        {"@type": "Product", "name": "Mystery"}
        </script></html>"""
        doc = RawDocument("d7", "shop.example", body, "jsonld_html")
        result = extract_offers_from_markup(doc)
        assert result.offers == []
        assert "language" in result.errors[0].reason

    def test_microdata_product(self):
        body = """<html lang="en"><div itemscope itemtype="https://schema.org/Product">
        <span itemprop="name">Galaxy S8</span>
        <meta itemprop="gtin13" content="8806088697802">
        <span itemprop="mpn">SM-G950F</span>
        </div></html>"""
        doc = RawDocument("d8", "shop.example", body, "microdata_html")
        result = extract_offers_from_markup(doc)
        assert len(result.offers) == 1
        offer = result.offers[0]
        assert offer.title == "Galaxy S8"
        assert offer.gtin == "8806088697802"
        assert offer.mpn == "SM-G950F"

    def test_bad_format_hint_rejected(self):
        doc = RawDocument("d9", "shop.example", "<html/>", "offer_feed")
        with pytest.raises(ValueError):
            extract_offers_from_markup(doc)


class TestValidateOffer:
    def valid(self, **overrides):
        base = dict(offer_id="o1", language="de", source_host="s", title="Phone")
        base.update(overrides)
        return Offer(**base)

    def test_valid_offer(self):
        assert validate_offer(self.valid()) == []

    def test_blank_title(self):
        assert "empty title" in validate_offer(self.valid(title="   "))

    def test_three_letter_language(self):
        assert "invalid language code" in validate_offer(self.valid(language="deu"))

    def test_ingest_output_revalidates_clean(self, corpus):
        assert all(validate_offer(o) == [] for o in corpus)
