"""Version definitions for artifacts written by this package."""

FEATURE_ORDER = ("h", "d_fast", "d_slow", "dp_epc", "dp_dlc", "dp_d")
FEATURE_ORDER_VERSION = "1"

versions = [
    {
        "artifact": "dataset",
        "major_version": 1,
        "minimum_minor_version": 0,
        "current_minor_version": 0,
    },
    {
        "artifact": "tree",
        "major_version": 1,
        "minimum_minor_version": 0,
        "current_minor_version": 0,
    },
    {
        "artifact": "plan",
        "major_version": 1,
        "minimum_minor_version": 0,
        "current_minor_version": 0,
    },
]


def current_version(artifact: str) -> str:
    """Return the current version string of an artifact kind."""
    for definition in versions:
        if definition["artifact"] == artifact:
            return "{major_version}.{current_minor_version}".format(**definition)
    raise KeyError(artifact)


def is_supported(artifact: str, version: str) -> bool:
    """Check whether an artifact written with version can be read."""
    major, _, minor = version.partition(".")
    if not major.isdigit() or not (minor or "0").isdigit():
        return False
    for definition in versions:
        if definition["artifact"] != artifact:
            continue
        return int(major) == definition["major_version"] and int(
            minor or 0
        ) >= definition["minimum_minor_version"]
    return False
