"""
Building splits and nested training portions
============================================

Raw articles are turned into (body, summary) pairs by taking the lead
sentences, filtered by length and split with the portable seeded shuffle.
"""

import numpy as np

from xlsum.corpus import (
    SplitSpec,
    SummaryPair,
    corpus_stats,
    length_filter,
    make_splits,
    portion_size,
    sample_portion,
    sentence_split,
    split_first_paragraph,
)

rng = np.random.default_rng(0)
words = ["tekma", "gostje", "zmaga", "vlada", "zakon", "vreme", "dež", "sonce", "občina", "župan"]


def article(n):
    sents = []
    for _ in range(n):
        toks = list(rng.choice(words, size=int(rng.integers(5, 14))))
        sents.append(toks[0].capitalize() + " " + " ".join(toks[1:]) + ".")
    return " ".join(sents)


pairs = []
for i in range(2000):
    text = article(int(rng.integers(6, 40)))
    summary, body = split_first_paragraph(sentence_split(text))
    pairs.append(SummaryPair(f"a{i}", body, summary))

kept = length_filter(pairs, 1000, 3000)
print(f"{len(kept)} of {len(pairs)} pairs have 1000-3000 characters")

train, val, test = make_splits(kept, SplitSpec(test_size=100, val_size=100, seed=0))
print(f"train {len(train)}, val {len(val)}, test {len(test)}")

st = corpus_stats([p.summary for p in train])
print(f"summaries: {st.avg_sentences:.2f} sentences, {st.avg_chars:.1f} characters on average")

# Portions are prefixes of one shuffle, so smaller ones sit inside larger ones
small, large = sample_portion(train, 10, seed=1), sample_portion(train, 50, seed=1)
print(len(small), len(large), set(p.id for p in small) <= set(p.id for p in large))
print("1% of 117563 ->", portion_size(117_563, 1))
