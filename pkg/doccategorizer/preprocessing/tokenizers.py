import re
from typing import List

# a word split across a line break by a hyphen: "exam-\nple"
_HYPHEN_BREAK = re.compile(r"(?<=[^\W_])-[ \t]*\r?\n\s*(?=[^\W_])")
# maximal runs of letters, digits and apostrophes
_TOKEN = re.compile(r"(?:[^\W_]|')+")
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


class WordTokenizer:
    """Lowercasing regex word tokenizer with de-hyphenation at line breaks."""

    name = "word"

    def tokenize(self, text: str) -> List[str]:
        if not text:
            return []
        text = _HYPHEN_BREAK.sub("", text).lower()
        return [t for t in _TOKEN.findall(text) if t.strip("'")]


class SentenceTokenizer:
    name = "sentence"

    def tokenize(self, text: str) -> List[str]:
        if not text:
            return []
        return [s.strip() for s in _SENTENCE_END.split(text) if s.strip()]


TOKENIZERS = {
    WordTokenizer.name: WordTokenizer,
    SentenceTokenizer.name: SentenceTokenizer,
}


def get_tokenizer(name: str = "word"):
    try:
        return TOKENIZERS[name]()
    except KeyError:
        raise ValueError(f"unknown tokenizer {name!r}, expected one of {sorted(TOKENIZERS)}") from None


def word_tokenize(text: str) -> List[str]:
    return WordTokenizer().tokenize(text)


def sentence_tokenize(text: str) -> List[str]:
    return SentenceTokenizer().tokenize(text)


class TokenizationTransformation:
    def __init__(self, tokenizer=None):
        self.tokenizer = tokenizer or WordTokenizer()

    def transform(self, texts) -> List[List[str]]:
        return [self.tokenizer.tokenize(text) for text in texts]
