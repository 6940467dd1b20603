import pytest

from gapriv.config import ConfigError, load_schema, parse_flat, read_flat, write_flat


def test_parse_flat_keeps_case_and_strips_comments():
    assert parse_flat("TEMP = 1  # note\n; comment\nrole.pm2.5 = public\n") == {"TEMP": "1", "role.pm2.5": "public"}


def test_round_trip(tmp_path):
    path = tmp_path / "c.cfg"
    write_flat(path, {"a": 1, "b": "x,y", "skip": None})
    assert read_flat(path) == {"a": "1", "b": "x,y"}


def test_duplicate_key_is_an_error():
    with pytest.raises(ConfigError):
        parse_flat("a = 1\na = 2\n")


def test_bundled_schemas():
    beijing = load_schema("beijing")
    assert beijing["features"] == ["year", "month", "day", "hour", "TEMP", "PRES", "Iws"]
    assert beijing["roles"] == {"pm2.5": "public", "DEWP": "private"}
    wine = load_schema("wine")
    assert len(wine["features"]) == 7 and len(wine["labels"]) == 5
    assert [k for k, v in wine["roles"].items() if v == "private"] == ["alcohol"]
    with pytest.raises(ConfigError):
        load_schema("nope")


def test_schema_file_with_delimiter_alias(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text("features = a, b\nlabels = y\nrole.y = private\ndelimiter = semicolon\n")
    assert load_schema(path)["delimiter"] == ";"
    path.write_text("labels = y\n")
    with pytest.raises(ConfigError):
        load_schema(path)
