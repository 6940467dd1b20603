"""Flat ``key = value`` config files and dataset schemas.

Example schema::

    features = year, month, day, hour, TEMP, PRES, Iws
    labels = pm2.5, DEWP
    role.DEWP = private
    role.pm2.5 = public
"""

import configparser
from importlib import resources
from pathlib import Path

_SECTION = "config"


class ConfigError(ValueError):
    pass


def parse_flat(text, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return {k.strip(): v.strip() for k, v in parser[_SECTION].items()}


def read_flat(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_flat(path.read_text(encoding="utf-8"), str(path))


def write_flat(path, mapping):
    lines = [f"{k} = {v}" for k, v in mapping.items() if v is not None]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def split_list(value):
    return [v.strip() for v in value.split(",") if v.strip()]


def schema_from_mapping(flat):
    try:
        schema = {"features": split_list(flat["features"]), "labels": split_list(flat["labels"])}
    except KeyError as exc:
        raise ConfigError(f"schema is missing {exc.args[0]!r}") from None
    schema["roles"] = {k[len("role."):]: v for k, v in flat.items() if k.startswith("role.")}
    if "delimiter" in flat:
        schema["delimiter"] = {"tab": "\t", "semicolon": ";", "comma": ","}.get(flat["delimiter"], flat["delimiter"])
    return schema


def load_schema(name_or_path):
    """Read a schema file, or one of the bundled ones (``beijing``, ``wine``)."""
    path = Path(name_or_path)
    if not path.is_file():
        bundled = resources.files("gapriv") / "schemas" / f"{name_or_path}.cfg"
        if not bundled.is_file():
            raise ConfigError(f"schema not found: {name_or_path}")
        return schema_from_mapping(parse_flat(bundled.read_text(encoding="utf-8"), str(name_or_path)))
    return schema_from_mapping(read_flat(path))
