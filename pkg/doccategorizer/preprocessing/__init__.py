from .embeddings import EmbeddingModel, EmbeddingTransformation, embed_sequence, load_embeddings
from .tfidf import TfIdfModel, tfidf_fit, tfidf_transform
from .tokenizers import (
    SentenceTokenizer,
    TokenizationTransformation,
    WordTokenizer,
    get_tokenizer,
    sentence_tokenize,
    word_tokenize,
)

__all__ = [
    "EmbeddingModel",
    "EmbeddingTransformation",
    "embed_sequence",
    "load_embeddings",
    "TfIdfModel",
    "tfidf_fit",
    "tfidf_transform",
    "SentenceTokenizer",
    "TokenizationTransformation",
    "WordTokenizer",
    "get_tokenizer",
    "sentence_tokenize",
    "word_tokenize",
]
