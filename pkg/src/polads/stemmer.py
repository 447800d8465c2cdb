"""English Snowball (Porter2) stemmer.

Pure-Python implementation of the revised Porter algorithm for English.
Words are expected lowercase; anything of two letters or less is returned
unchanged. Suffix tables follow longest-match-wins semantics: once a listed
suffix matches, shorter alternatives are never tried, even if the region
condition fails.
"""

from __future__ import annotations

_VOWELS = frozenset("aeiouy")
_DOUBLES = ("bb", "dd", "ff", "gg", "mm", "nn", "pp", "rr", "tt")
_LI_ENDINGS = frozenset("cdeghkmnrt")

_SPECIAL_STEMS = {
    "skis": "ski", "skies": "sky",
    "dying": "die", "lying": "lie", "tying": "tie",
    "idly": "idl", "gently": "gentl", "ugly": "ugli", "early": "earli",
    "only": "onli", "singly": "singl",
    "sky": "sky", "news": "news", "howe": "howe",
    "atlas": "atlas", "cosmos": "cosmos", "bias": "bias", "andes": "andes",
}

_STOP_AFTER_1A = frozenset((
    "inning", "outing", "canning", "herring", "earring",
    "proceed", "exceed", "succeed",
))

# (suffix, replacement, required preceding letters) ordered longest first
_STEP2_RULES = (
    ("ization", "ize", None), ("ational", "ate", None), ("fulness", "ful", None),
    ("ousness", "ous", None), ("iveness", "ive", None),
    ("tional", "tion", None), ("biliti", "ble", None), ("lessli", "less", None),
    ("entli", "ent", None), ("ation", "ate", None), ("alism", "al", None),
    ("aliti", "al", None), ("ousli", "ous", None), ("iviti", "ive", None),
    ("fulli", "ful", None),
    ("enci", "ence", None), ("anci", "ance", None), ("abli", "able", None),
    ("izer", "ize", None), ("ator", "ate", None), ("alli", "al", None),
    ("bli", "ble", None), ("ogi", "og", "l"),
    ("li", "", _LI_ENDINGS),
)

_STEP3_RULES = (
    ("ational", "ate", False), ("tional", "tion", False),
    ("alize", "al", False), ("icate", "ic", False), ("iciti", "ic", False),
    ("ative", "", True),
    ("ical", "ic", False), ("ness", "", False),
    ("ful", "", False),
)

_STEP4_SUFFIXES = (
    "ement",
    "ance", "ence", "able", "ible", "ment",
    "ant", "ent", "ism", "ate", "iti", "ous", "ive", "ize", "ion",
    "al", "er", "ic",
)


def _mark_consonant_ys(word: str) -> str:
    chars = list(word)
    if chars[0] == "y":
        chars[0] = "Y"
    for i in range(1, len(chars)):
        if chars[i] == "y" and chars[i - 1] in _VOWELS:
            chars[i] = "Y"
    return "".join(chars)


def _region1(word: str) -> int:
    for prefix in ("gener", "commun", "arsen"):
        if word.startswith(prefix):
            return len(prefix)
    for i in range(1, len(word)):
        if word[i] not in _VOWELS and word[i - 1] in _VOWELS:
            return i + 1
    return len(word)


def _region2(word: str, r1: int) -> int:
    for i in range(r1 + 1, len(word)):
        if word[i] not in _VOWELS and word[i - 1] in _VOWELS:
            return i + 1
    return len(word)


def _ends_short_syllable(word: str) -> bool:
    if len(word) == 2:
        return word[0] in _VOWELS and word[1] not in _VOWELS
    if len(word) >= 3:
        a, b, c = word[-3], word[-2], word[-1]
        return (a not in _VOWELS and b in _VOWELS
                and c not in _VOWELS and c not in "wxY")
    return False


def _is_short(word: str, r1: int) -> bool:
    return r1 >= len(word) and _ends_short_syllable(word)


def _step0(word: str) -> str:
    for suffix in ("'s'", "'s", "'"):
        if word.endswith(suffix):
            return word[: -len(suffix)]
    return word


def _step1a(word: str) -> str:
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith("ied") or word.endswith("ies"):
        return word[:-3] + ("i" if len(word) > 4 else "ie")
    if word.endswith("us") or word.endswith("ss"):
        return word
    if word.endswith("s"):
        # delete only if a vowel occurs before the letter preceding the s
        if any(ch in _VOWELS for ch in word[:-2]):
            return word[:-1]
    return word


def _step1b(word: str, r1: int) -> str:
    for suffix in ("eedly", "eed"):
        if word.endswith(suffix):
            if len(word) - len(suffix) >= r1:
                return word[: -len(suffix)] + "ee"
            return word
    for suffix in ("ingly", "edly", "ing", "ed"):
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if not any(ch in _VOWELS for ch in stem):
                return word
            if stem.endswith(("at", "bl", "iz")):
                return stem + "e"
            if stem.endswith(_DOUBLES):
                return stem[:-1]
            if _is_short(stem, r1):
                return stem + "e"
            return stem
    return word


def _step1c(word: str) -> str:
    if len(word) > 2 and word[-1] in "yY" and word[-2] not in _VOWELS:
        return word[:-1] + "i"
    return word


def _step2(word: str, r1: int) -> str:
    for suffix, repl, preceding in _STEP2_RULES:
        if word.endswith(suffix):
            if len(word) - len(suffix) >= r1:
                stem = word[: -len(suffix)]
                if preceding is None or (stem and stem[-1] in preceding):
                    return stem + repl
            return word
    return word


def _step3(word: str, r1: int, r2: int) -> str:
    for suffix, repl, needs_r2 in _STEP3_RULES:
        if word.endswith(suffix):
            at = len(word) - len(suffix)
            if at >= r1 and (not needs_r2 or at >= r2):
                return word[:at] + repl
            return word
    return word


def _step4(word: str, r2: int) -> str:
    for suffix in _STEP4_SUFFIXES:
        if word.endswith(suffix):
            at = len(word) - len(suffix)
            if at >= r2:
                if suffix == "ion" and not word[:at].endswith(("s", "t")):
                    return word
                return word[:at]
            return word
    return word


def _step5(word: str, r1: int, r2: int) -> str:
    if word.endswith("e"):
        if len(word) - 1 >= r2:
            return word[:-1]
        if len(word) - 1 >= r1 and not _ends_short_syllable(word[:-1]):
            return word[:-1]
        return word
    if word.endswith("ll") and len(word) - 1 >= r2:
        return word[:-1]
    return word


def stem(word: str) -> str:
    """Stem one lowercase word with the English Porter2 algorithm."""
    if len(word) <= 2:
        return word
    if word[0] == "'":
        word = word[1:]
    special = _SPECIAL_STEMS.get(word)
    if special is not None:
        return special
    if len(word) <= 2:
        return word
    word = _mark_consonant_ys(word)
    r1 = _region1(word)
    r2 = _region2(word, r1)
    word = _step0(word)
    word = _step1a(word)
    if word in _STOP_AFTER_1A:
        return word
    word = _step1b(word, r1)
    word = _step1c(word)
    word = _step2(word, r1)
    word = _step3(word, r1, r2)
    word = _step4(word, r2)
    word = _step5(word, r1, r2)
    return word.replace("Y", "y")
