"""
Intrusion Taxonomy

Static exploit -> metatype table for the KDD'99 label hierarchy, shipped as
a plain-text data file next to this module.
"""

from importlib import resources
from pathlib import Path
from typing import Dict, Optional

from ..core.errors import LabelSpaceError
from ..core.state import Metatype

TAXONOMY_FILE = "kdd_taxonomy.txt"


def parse_taxonomy(text: str, source: str = TAXONOMY_FILE) -> Dict[str, Metatype]:
    """
    Parse taxonomy text.

    Args:
        text: File contents, one ``<exploit> <metatype>`` pair per line
        source: Name used in error messages

    Returns:
        Mapping of exploit name to Metatype
    """
    taxonomy: Dict[str, Metatype] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise LabelSpaceError(f"{source}:{number}: expected '<exploit> <metatype>', got {raw!r}")
        exploit, metatype = parts
        try:
            taxonomy[exploit] = Metatype(metatype)
        except ValueError:
            raise LabelSpaceError(f"{source}:{number}: unknown metatype {metatype!r}") from None
    return taxonomy


def load_taxonomy(path: Optional[Path] = None) -> Dict[str, Metatype]:
    """Load a user taxonomy file, or the shipped one when ``path`` is None."""
    if path is None:
        text = resources.files(__package__).joinpath(TAXONOMY_FILE).read_text(encoding="utf-8")
        return parse_taxonomy(text)
    with open(path, "r", encoding="utf-8") as f:
        return parse_taxonomy(f.read(), source=str(path))


def metatype_of(exploit: str, taxonomy: Dict[str, Metatype]) -> Metatype:
    return taxonomy.get(exploit, Metatype.UNLISTED)
