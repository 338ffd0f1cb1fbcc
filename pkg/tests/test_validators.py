import pytest

from core.errors import UnknownTagError
from core.inducer import KNOWN_TAGS, parse_tag
from utils.validators import (
    csv_columns,
    is_probability,
    is_valid_cost_mode,
    is_valid_format,
    is_valid_tag,
    missing_columns,
    normalize_tag,
    split_tags,
)


@pytest.mark.parametrize("tag", ["enhanced", "ec45", "PC45", " c-cart ", "pecart", "asr", "bal"])
def test_valid_tags(tag):
    assert is_valid_tag(tag)


@pytest.mark.parametrize("tag", ["pasr", "pip", "pbal", "id3", "", "c45p"])
def test_invalid_tags(tag):
    assert normalize_tag(tag) is None


def test_normalize_lowercases():
    assert normalize_tag(" PC-CART") == "pc-cart"


@pytest.mark.parametrize("tag", ["c45", "pc45", "pasr", "ip", "pip", "pecart", "id3", "c-c45"])
def test_tag_check_agrees_with_parser(tag):
    try:
        parse_tag(tag)
        parsed = True
    except UnknownTagError:
        parsed = False
    assert is_valid_tag(tag) == parsed


def test_every_known_tag_is_valid():
    assert all(is_valid_tag(tag) for tag in KNOWN_TAGS)


def test_split_tags():
    assert split_tags("c45, pc45,c45,, ec45") == ["c45", "pc45", "ec45"]
    assert split_tags("") == []


def test_formats_and_modes():
    assert is_valid_format("DOT") and is_valid_format("json")
    assert not is_valid_format("png")
    assert is_valid_cost_mode("random") and not is_valid_cost_mode("Random")


def test_columns(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a, b ,label\n1,2,x\n")
    assert csv_columns(path) == ["a", "b", "label"]
    assert missing_columns(path, ["label", "class"]) == ["class"]


def test_is_probability():
    assert is_probability(0.0) and is_probability(1.0)
    assert not is_probability(-0.1) and not is_probability(1.5)
