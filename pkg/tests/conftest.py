"""Shared fixtures: small SQuAD-format documents, a toy embedding store,
the vendored confusable table, and a synthetic corpus builder."""
from __future__ import annotations

import json
import random

import pytest

from advspan.confusables import load_default_table
from advspan.corpus import parse_dataset
from advspan.embeddings import load_embeddings

# Context/question/answer of the canonical worked example used throughout.
CURIE_CONTEXT = (
    "One of the most famous people born in Warsaw was Maria Skłodowska-Curie, "
    "who achieved international recognition for her research on radioactivity "
    "and was the first female recipient of the Nobel Prize."
)
CURIE_QUESTION = "What was Maria Curie the first female recipient of?"
CURIE_ANSWER = "Nobel Prize"


def squad_doc(paragraphs):
    """Build a SQuAD-format dict from [(context, [(id, question, answer_text,
    answer_start), ...]), ...]."""
    return {
        "version": "1.1",
        "data": [{
            "title": "test",
            "paragraphs": [
                {
                    "context": context,
                    "qas": [
                        {
                            "id": qa_id,
                            "question": question,
                            "answers": [{"text": text, "answer_start": start}],
                        }
                        for qa_id, question, text, start in qas
                    ],
                }
                for context, qas in paragraphs
            ],
        }],
    }


def squad_bytes(paragraphs) -> bytes:
    return json.dumps(squad_doc(paragraphs), ensure_ascii=False).encode("utf-8")


@pytest.fixture(scope="session")
def confusable_table():
    return load_default_table()


@pytest.fixture
def curie_dataset():
    start = CURIE_CONTEXT.index(CURIE_ANSWER)
    return parse_dataset(squad_bytes(
        [(CURIE_CONTEXT, [("curie-1", CURIE_QUESTION, CURIE_ANSWER, start)])]))


@pytest.fixture(scope="session")
def tiny_store():
    """The three-word toy space used for the worked nearest-neighbor cases."""
    return load_embeddings(b"cat 1.0 0.0\ndog 0.9 0.1\nfish 0.0 1.0\n")


# Word pool for synthetic corpora; answers are drawn from the separate
# ANSWER_POOL so mock rules can key on them unambiguously.
WORD_POOL = [
    "forest", "river", "mountain", "valley", "citadel", "harbor", "garden",
    "meadow", "bridge", "castle", "village", "temple", "market", "tower",
    "road", "field", "stone", "light", "storm", "winter", "summer", "night",
    "morning", "crowd", "silver", "golden", "ancient", "quiet", "broken",
    "hidden", "narrow", "distant", "bright", "heavy", "hollow", "frozen",
]
ANSWER_POOL = ["Zephyrus", "Oakhollow", "Brightwater", "Stormvale", "Irongate"]


def synthetic_corpus(n_paragraphs: int, seed: int = 7,
                     sentences_per_paragraph: int = 4,
                     words_per_sentence: int = 9):
    """Deterministic corpus: every paragraph hides one answer from
    ANSWER_POOL inside one of its sentences."""
    rng = random.Random(seed)
    paragraphs = []
    for p in range(n_paragraphs):
        sentences = []
        answer = rng.choice(ANSWER_POOL)
        answer_sentence = rng.randrange(sentences_per_paragraph)
        for s in range(sentences_per_paragraph):
            words = [rng.choice(WORD_POOL) for _ in range(words_per_sentence)]
            if s == answer_sentence:
                words[rng.randrange(2, len(words) - 1)] = answer
            words[0] = words[0].capitalize()
            sentences.append(" ".join(words) + ".")
        context = " ".join(sentences)
        start = context.index(answer)
        paragraphs.append((context, [
            (f"p{p}-q0", f"Where is the {answer} found?", answer, start),
        ]))
    return parse_dataset(squad_bytes(paragraphs))
