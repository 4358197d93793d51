"""Lowercase word tokenization and content-keyword extraction."""

import re

_WORD = re.compile(r"[a-z]+")

# Function words plus contraction remnants left behind by the tokenizer
# ("flynn's" tokenizes to "flynn", "s").
DEFAULT_STOPLIST = frozenset(
    """
    a an the and or nor but so yet if then than because while although though
    as of at by for with within without about against between into through
    during before after above below to from up down in out on off over under
    again further once here there when where why how all any both each few
    more most other some such no not only own same too very just also
    i me my we our you your he him his she her it its they them their
    what which who whom this that these those am is are was were be been
    being have has had having do does did doing will would shall should can
    could may might must ought
    s t d ll m re ve y
    """.split()
)


def tokenize(text: str) -> list[str]:
    """Lowercased alphabetic word runs, in order of appearance."""
    return _WORD.findall(text.lower())


def extract_keywords(text: str, stoplist=None) -> set[str]:
    """Content words of ``text``: lowercased alphabetic tokens minus the stoplist."""
    stop = DEFAULT_STOPLIST if stoplist is None else stoplist
    return {tok for tok in tokenize(text) if tok not in stop}
