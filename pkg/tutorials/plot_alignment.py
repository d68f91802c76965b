"""
Mapping one embedding space onto another
========================================

A target space is built as a noisy rotation of a source space. Procrustes
recovers the rotation from a training lexicon, and translation retrieval on
held-out pairs shows how well the mapped space lines up.
"""

import numpy as np

from xlsum.alignment import apply_map, orthogonality_residual, pair_matrices, procrustes, retrieval_report
from xlsum.synthetic import rotation_fixture

# 500 words in 20 dimensions, with a little noise on the target side
tgt, src, lex, R = rotation_fixture(n_words=500, dim=20, seed=0, noise=0.05)
train = type(lex)(lex.pairs[:400])
test = type(lex)(lex.pairs[400:])

X, Y, kept = pair_matrices(train, tgt, src)
m = procrustes(X, Y)
print(f"pairs used: {len(kept)}, training loss: {m.train_loss:.3f}")
print(f"orthogonality residual: {orthogonality_residual(m.W):.1e}")
print(f"max |W - R|: {np.max(np.abs(m.W - R)):.4f}")

# Nearest-neighbour retrieval of the source word for each held-out target word
rep = retrieval_report(apply_map(m, tgt), src, test, ks=(1, 5, 10))
for k, p in rep.precision.items():
    print(f"P@{k}: {p:.3f}")
