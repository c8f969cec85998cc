import hypothesis.strategies as st
import pytest
from hypothesis import given

from linkscrub.core.exceptions import ParsingError, UrlParsingError
from linkscrub.urls import (
    DecorationKind,
    FilterList,
    FilterRule,
    SanitizeMode,
    decompose,
    decorations_of,
    parse_filter_list,
    reassemble,
    registrable_domain,
    sanitize,
    sanitize_with_audit,
    site_of,
)
from linkscrub.urls.models import kind_of_key, query_key, unescape_query_key

EXAMPLE_URL = "https://a.site.example/YYY/ZZZ/pixel.jpg?ISBN=ABC&UID=DEF123#xyz"
EXAMPLE_SITE = "pub.example"

segment = st.text(alphabet="abcdefghijklmnopqrstuvwxyzABCXYZ0123456789-_.~%2F", min_size=0, max_size=8)
key = st.text(alphabet="abcdefgxyz_0123456789", min_size=1, max_size=6)
value = st.text(alphabet="abcXYZ0189-_.%20+", min_size=0, max_size=10)


@st.composite
def urls(draw):
    host = draw(st.sampled_from(["a.site.example", "www.example.com", "px.tracker.co.uk", "10.0.0.1", "h.io:8080"]))
    path = "/".join(draw(st.lists(segment, max_size=4)))
    url = f"{draw(st.sampled_from(['https', 'http', 'HTTPS']))}://{host}/{path}"

    if draw(st.booleans()):
        pairs = draw(st.lists(st.tuples(key, value), max_size=4))
        url += "?" + "&".join(f"{k}={v}" for k, v in pairs)
    if draw(st.booleans()):
        url += "#" + draw(st.one_of(value, st.tuples(key, value).map(lambda pair: f"{pair[0]}={pair[1]}")))

    return url


def test_example_decomposition():
    decorated = decompose(EXAMPLE_URL, EXAMPLE_SITE)

    assert decorated.path_values == ["YYY", "ZZZ"]
    assert decorated.resource_name.value == "pixel.jpg"
    assert decorated.query_pairs == [("ISBN", "ABC"), ("UID", "DEF123")]
    assert decorated.fragment_value == "xyz"
    assert reassemble(decorated) == EXAMPLE_URL


def test_example_names_five_decorations():
    names = [str(decoration) for decoration in decorations_of(EXAMPLE_URL, EXAMPLE_SITE)]

    assert names == [
        "a.site.example|path|0:YYY",
        "a.site.example|path|1:ZZZ",
        "a.site.example|ISBN:ABC",
        "a.site.example|UID:DEF123",
        "a.site.example|fragment:xyz",
    ]


@given(urls())
def test_decompose_reassemble_is_stable(url):
    decorated = decompose(url)

    assert reassemble(decorated) == url
    assert decompose(reassemble(decorated)) == decorated


@given(urls())
def test_decoration_keys_name_their_kind(url):
    for decoration in decorations_of(url, "example.com"):
        assert decoration.id.kind == decoration.kind


def test_empty_query_tokens_are_skipped():
    decorations = decorations_of("https://h.example/?a=1&&b=2", "s.example")

    assert [(d.id.key, d.value, d.position) for d in decorations] == [("a", "1", 0), ("b", "2", 1)]
    assert reassemble(decompose("https://h.example/?a=1&&b=2")) == "https://h.example/?a=1&&b=2"


def test_trailing_slash_and_empty_query_survive():
    for url in ["https://h.example/a/b/", "https://h.example/x?", "https://h.example/x#", "https://h.example"]:
        assert reassemble(decompose(url)) == url

    assert [d.id.key for d in decorations_of("https://h.example/a/b/", "s")] == ["path|0", "path|1"]


def test_fragment_pairs_are_keyed():
    decorations = decorations_of("https://h.example/p#ref=abc&x=1", "s.example")

    assert [d.id.key for d in decorations] == ["fragment|ref", "fragment|x"]
    assert all(d.kind == DecorationKind.FRAGMENT for d in decorations)


def test_percent_decoding():
    decorated = decompose("https://h.example/a%20b/?k=v%2Fw")

    assert decorated.path_values == ["a b"]
    assert decorated.query_pairs == [("k", "v/w")]


def test_query_keys_shaped_like_other_kinds_are_escaped():
    assert query_key("path|3") == "query|path|3"
    assert query_key("fragment") == "query|fragment"
    assert query_key("uid") == "uid"
    assert kind_of_key(query_key("path|3")) == DecorationKind.QUERY
    assert unescape_query_key("query|path|3") == "path|3"

    decorations = decorations_of("https://h.example/?fragment=1", "s.example")
    assert decorations[0].kind == DecorationKind.QUERY


@pytest.mark.parametrize(
    "url",
    [
        "not a url",
        "//no-scheme.example/path",
        "1http://h.example/",
        "https:/missing-authority",
        "https://bad host/",
        "https://h.example:12ab/",
        "https://[zz]/",
    ],
)
def test_malformed_urls(url):
    with pytest.raises(UrlParsingError) as error:
        decompose(url)

    assert error.value.url == url
    assert error.value.span is not None


def test_url_errors_are_parsing_errors():
    with pytest.raises(ParsingError):
        decompose("https://exa mple.com/")


@pytest.mark.parametrize(
    "host, expected",
    [
        ("www.example.com", "example.com"),
        ("a.b.example.co.uk", "example.co.uk"),
        ("tracker1.example", "tracker1.example"),
        ("cdn.px.tracker.example", "tracker.example"),
        ("www.bbc.co.kr", "bbc.co.kr"),
        ("shop.example.com.mx", "example.com.mx"),
        ("user.github.io", "user.github.io"),
        ("WWW.Example.COM.", "example.com"),
        ("10.0.0.1", "10.0.0.1"),
        ("localhost", "localhost"),
    ],
)
def test_registrable_domain(host, expected):
    assert registrable_domain(host) == expected


def test_registrable_domain_with_a_custom_list(tmp_path):
    psl_file = tmp_path / "suffixes.dat"
    psl_file.write_text("// ===BEGIN ICANN DOMAINS===\nexample\nshop.example\n", encoding="utf-8")

    assert registrable_domain("a.b.shop.example", psl_file=str(psl_file)) == "b.shop.example"
    assert registrable_domain("www.example.co.uk", psl_file=str(psl_file)) == "co.uk"


def test_missing_suffix_list_is_a_parsing_error(tmp_path):
    with pytest.raises(ParsingError):
        registrable_domain("www.example.com", psl_file=str(tmp_path / "missing.dat"))


def test_site_of():
    assert site_of("https://www.shop.co.uk/cart?x=1") == "shop.co.uk"


def uid_rule(**overrides) -> FilterList:
    return FilterList(rules=[FilterRule(fqdn="a.site.example", key="UID", **overrides)])


def test_replace_keeps_length_and_everything_else():
    result = sanitize_with_audit(EXAMPLE_URL, EXAMPLE_SITE, uid_rule())
    before = decompose(EXAMPLE_URL)
    after = decompose(result.url)

    assert result.replaced == ["a.site.example|UID"]
    assert after.query_pairs[0] == ("ISBN", "ABC")
    assert after.query_pairs[1][0] == "UID"
    assert len(after.query_pairs[1][1]) == len("DEF123")
    assert after.query_pairs[1][1] != "DEF123"
    assert after.path_values == before.path_values
    assert after.fragment_value == before.fragment_value


def test_replace_is_seeded():
    first = sanitize(EXAMPLE_URL, EXAMPLE_SITE, uid_rule(), seed=3)

    assert sanitize(EXAMPLE_URL, EXAMPLE_SITE, uid_rule(), seed=3) == first


def test_strip_removes_the_pair():
    stripped = sanitize(EXAMPLE_URL, EXAMPLE_SITE, uid_rule(action=SanitizeMode.STRIP))

    assert stripped == "https://a.site.example/YYY/ZZZ/pixel.jpg?ISBN=ABC#xyz"


def test_strip_last_pair_drops_the_separator():
    rules = FilterList(rules=[FilterRule(fqdn="*", key="uid", action=SanitizeMode.STRIP)])

    assert sanitize("https://h.example/p?uid=12345", "s.example", rules) == "https://h.example/p"


def test_path_rules_always_replace():
    rules = FilterList(rules=[FilterRule(fqdn="*.site.example", key="path|1", action=SanitizeMode.STRIP)])
    result = sanitize_with_audit(EXAMPLE_URL, EXAMPLE_SITE, rules)

    assert decompose(result.url).path_values[0] == "YYY"
    assert len(decompose(result.url).path_values[1]) == 3
    assert result.stripped == []


def test_inapplicable_path_rule_is_audited():
    rules = FilterList(rules=[FilterRule(fqdn="a.site.example", key="path|5")])
    result = sanitize_with_audit(EXAMPLE_URL, EXAMPLE_SITE, rules)

    assert result.url == EXAMPLE_URL
    assert len(result.audit) == 1
    assert "not applicable" in result.audit[0]


def test_scope_limits_rules():
    rules = uid_rule(scope="other.example")

    assert sanitize(EXAMPLE_URL, EXAMPLE_SITE, rules) == EXAMPLE_URL


def test_no_rules_leaves_url_untouched():
    assert sanitize(EXAMPLE_URL, EXAMPLE_SITE, FilterList()) == EXAMPLE_URL


def test_filter_list_text_round_trip():
    rules = FilterList(
        rules=[
            FilterRule(fqdn="b.example", key="uid", score=0.75, model_version="1"),
            FilterRule(scope="pub.example", fqdn="*.a.example", key="path|0", action=SanitizeMode.STRIP),
        ]
    ).sorted()

    assert parse_filter_list(rules.dumps()) == rules


@pytest.mark.parametrize(
    "line",
    [
        "*\tb.example\tuid\treplace\t1.0",
        "*\tb.example\tuid\tdelete\t1.0\t",
        "*\tb.example\tpath|x\treplace\t1.0\t",
        "*\tb.example\tuid\treplace\t2.0\t",
    ],
)
def test_filter_list_rejects_bad_lines(line):
    with pytest.raises(ParsingError):
        parse_filter_list(line)
