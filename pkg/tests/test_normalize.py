import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_post
from toxivec.normalize import (normalize_post, normalize_text,
                               remove_platform_metadata, remove_urls,
                               strip_markup, tokenize)


class TestStripMarkup:
    @pytest.mark.parametrize("raw,expected", [
        ("&gt;tfw no gf", ">tfw no gf"),
        ("a<br>b", "a b"),
        ('<span class="quote">&gt;text</span>', ">text"),
        ("a<br/>b<br />c<BR>d", "a b c d"),
        ("&amp;gt; stays encoded once", "&gt; stays encoded once"),
        ("&quot;q&quot; &apos;a&apos; &amp;", "\"q\" 'a' &"),
        ("x&nbsp;y", "x\xa0y"),
        ("&#62; and &#x3E;", "> and >"),
        ("&#128169;", "\U0001f4a9"),
        ("&bogus; &#xZZ; stay", "&bogus; &#xZZ; stay"),
        ("i <3 u and 5 > 3", "i <3 u and 5 > 3"),
        ('<a href="https://x.io">link</a>', "link"),
        ("no markup at all", "no markup at all"),
    ])
    def test_cases(self, raw, expected):
        assert strip_markup(raw) == expected


class TestRemoveUrls:
    def test_http_url_replaced_by_space(self):
        assert remove_urls("Check https://example.com NOW") == "Check   NOW"

    def test_no_urls_identity(self):
        assert remove_urls("no urls here") == "no urls here"

    def test_www_url(self):
        assert remove_urls("www.foo.bar/baz end") == "  end"

    def test_url_consumes_to_whitespace(self):
        assert remove_urls("a http://x.io/a?b=1#c b") == "a   b"


class TestRemovePlatformMetadata:
    def test_quote_link(self):
        assert remove_platform_metadata(">>12345 lurk moar") == " lurk moar"

    def test_greentext_line_initial(self):
        assert remove_platform_metadata(">implying") == "implying"

    def test_inner_gt_untouched(self):
        assert remove_platform_metadata("5 > 3") == "5 > 3"

    def test_cross_board_link(self):
        assert remove_platform_metadata(">>>/pol/ go back") == " go back"

    def test_greentext_on_every_line(self):
        assert remove_platform_metadata(">a\n>b\nc") == "a\nb\nc"

    def test_quote_link_mid_text(self):
        assert remove_platform_metadata("as said in >>99 already") == "as said in  already"


class TestTokenize:
    def test_lowercase_and_contractions(self):
        assert tokenize("The CUCKS won't win") == ["the", "cucks", "won't", "win"]

    def test_empty(self):
        assert tokenize("") == []

    def test_separators(self):
        assert tokenize("alt-right!!1") == ["alt-right", "1"]

    def test_underscore_is_separator(self):
        assert tokenize("snake_case") == ["snake", "case"]

    def test_unicode_letters_kept(self):
        assert tokenize("ÜBER ß мама") == ["über", "ß", "мама"]

    def test_emoji_separates(self):
        assert tokenize("a\U0001f602b") == ["a", "b"]


class TestNormalizePost:
    def test_plain_body(self):
        assert normalize_post(make_post("hello world")) == ["hello", "world"]

    def test_stage_composition(self):
        # by stages: "&gt;be me<br>lose" -> ">be me lose" -> greentext cut -> tokens
        assert normalize_post(make_post("&gt;be me<br>lose")) == ["be", "me", "lose"]

    def test_nothing_left_returns_none(self):
        assert normalize_post(make_post(">>111 https://x.io")) is None

    def test_empty_body_returns_none(self):
        assert normalize_post(make_post("")) is None


# Printable text plus the markup/metadata characters we care about.
_text = st.text(
    alphabet=st.one_of(
        st.characters(min_codepoint=32, max_codepoint=0x2FFF),
        st.sampled_from("<>&;/\\\"'\n\t>>#.:-_"),
    ),
    max_size=200,
)


@given(_text)
def test_tokens_are_clean(raw):
    for token in normalize_text(raw):
        assert token, "empty token"
        assert not any(ch.isspace() for ch in token)
        assert token == token.lower()
        assert ">>" not in token and ">" not in token


@given(_text)
def test_tokenize_fixed_point(raw):
    tokens = tokenize(raw)
    assert tokenize(" ".join(tokens)) == tokens


@given(_text)
def test_normalize_idempotent_on_reserialized_output(raw):
    tokens = normalize_text(raw)
    assert normalize_text(" ".join(tokens)) == tokens
