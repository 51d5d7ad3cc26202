import pytest
from hypothesis import given, strategies as st

from uniweb.errors import UrlParseError
from uniweb.urls import (
    APEX,
    EXTERNAL,
    SUBDIRECTORY,
    SUBDOMAIN,
    classify_against_domains,
    is_single_page,
    parse_and_normalize_url,
    second_level_label,
)


class TestParseAndNormalize:
    def test_case_and_slash_canonicalization(self):
        url = parse_and_normalize_url("HTTP://UB.ES/")
        assert url.normalized == "http://ub.es"
        assert url.syntax_class == APEX
        assert not url.dynamic

    def test_query_string_marks_dynamic(self):
        url = parse_and_normalize_url("http://x.es/page?id=123")
        assert url.dynamic

    def test_scheme_less_gets_default_scheme(self):
        url = parse_and_normalize_url("biblioteca.upc.edu")
        assert url.normalized == "http://biblioteca.upc.edu"
        assert url.host == "biblioteca.upc.edu"

    def test_www_prefix_is_transparent(self):
        assert parse_and_normalize_url("http://www.ub.es").normalized == "http://ub.es"

    def test_path_preserved_and_trailing_slash_stripped(self):
        url = parse_and_normalize_url("http://ub.es/Biblioteca/")
        assert url.normalized == "http://ub.es/Biblioteca"
        assert url.syntax_class == SUBDIRECTORY

    def test_session_id_path_is_dynamic(self):
        assert parse_and_normalize_url("http://x.es/page;jsessionid=AF31").dynamic

    @pytest.mark.parametrize("raw", ["", "   ", "http://", "http:///path", "not a url"])
    def test_malformed_inputs_raise(self, raw):
        with pytest.raises(UrlParseError):
            parse_and_normalize_url(raw)

    def test_parse_error_names_input(self):
        with pytest.raises(UrlParseError, match="no host"):
            parse_and_normalize_url("http://???")

    @given(
        st.sampled_from(
            [
                "http://ub.es",
                "HTTPS://WWW.UPC.EDU/campus/",
                "biblioteca.upc.edu",
                "http://x.es/a/b/c?q=1",
                "http://x.es:8080/path",
            ]
        )
    )
    def test_normalization_idempotent(self, raw):
        once = parse_and_normalize_url(raw)
        twice = parse_and_normalize_url(once.normalized)
        assert twice.normalized == once.normalized

    @given(
        st.from_regex(r"[a-z][a-z0-9]{0,8}\.(es|edu|org)", fullmatch=True),
        st.lists(st.from_regex(r"[a-zA-Z0-9]{1,6}", fullmatch=True), max_size=3),
    )
    def test_idempotence_over_generated_urls(self, host, segments):
        raw = "http://" + host + "".join("/" + s for s in segments)
        once = parse_and_normalize_url(raw)
        assert parse_and_normalize_url(once.normalized).normalized == once.normalized


class TestClassification:
    def test_subdomain(self):
        url = parse_and_normalize_url("http://biblioteca.upc.edu")
        assert classify_against_domains(url, {"upc.edu"}) == SUBDOMAIN

    def test_subdirectory(self):
        url = parse_and_normalize_url("http://ub.edu/biblioteca")
        assert classify_against_domains(url, {"ub.edu"}) == SUBDIRECTORY

    def test_apex(self):
        url = parse_and_normalize_url("http://ub.es")
        assert classify_against_domains(url, {"ub.es", "ub.edu"}) == APEX

    def test_external(self):
        url = parse_and_normalize_url("http://example.org")
        assert classify_against_domains(url, {"ub.es", "ub.edu"}) == EXTERNAL

    def test_label_boundary_not_substring(self):
        # myub.es is not a subdomain of ub.es
        url = parse_and_normalize_url("http://myub.es")
        assert classify_against_domains(url, {"ub.es"}) == EXTERNAL

    def test_exact_match_wins_over_subdomain(self):
        url = parse_and_normalize_url("http://biblioteca.upc.edu/cataleg")
        assert classify_against_domains(url, {"upc.edu", "biblioteca.upc.edu"}) == SUBDIRECTORY


class TestSinglePage:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("http://x.es/index.html", True),
            ("http://x.es/doc.xml", True),
            ("http://x.es/page.HTM", True),
            ("http://x.es/section", False),
            ("http://x.es/v1.2/docs", False),
            ("http://x.es", False),
        ],
    )
    def test_detection(self, raw, expected):
        assert is_single_page(parse_and_normalize_url(raw)) is expected


def test_second_level_label():
    assert second_level_label("ub.es") == "ub"
    assert second_level_label("ub.edu") == "ub"
    assert second_level_label("biblioteca.upc.edu") == "upc"
