"""Training event embeddings and exporting them for plotting.

Trains a TI2Vec model, checks that an event's nearest neighbour in the
embedding space usually shares its label, and writes one JSON line per
event that an external plotting tool can read.
"""

import numpy as np

from tifeed.features import embed_corpus, write_vectors_jsonl
from tifeed.synthetic import make_corpus
from tifeed.textprep import build_docs
from tifeed.ti2vec import Hyper, train_ti2vec

corpus = make_corpus(800, seed=2, planted_range=(4, 8),
                     positive_tokens=("njrat", "darkcomet", "ransomware"))
docs = build_docs(corpus)
model = train_ti2vec(docs, Hyper(dim=100, epochs=15, seed=2, infer_steps=100))
print(f"vocabulary of {len(model.vocab)} tokens, {len(model.doc_ids)} document vectors")

matrix = embed_corpus(model, docs)
positive = np.array([e.label.as_int() == 1 for e in corpus.events])

# cosine similarity after removing the mean direction shared by all documents
rows = matrix.rows - matrix.rows.mean(axis=0)
rows /= np.linalg.norm(rows, axis=1, keepdims=True)
sim = rows @ rows.T
np.fill_diagonal(sim, -np.inf)
nearest = sim.argmax(axis=1)
print(f"nearest neighbour has the same label for {np.mean(positive[nearest] == positive):.1%} of events")

np.fill_diagonal(sim, np.nan)
print(f"mean similarity: exploitation pairs {np.nanmean(sim[np.ix_(positive, positive)]):.2f}, "
      f"mixed pairs {np.nanmean(sim[np.ix_(positive, ~positive)]):.2f}")

write_vectors_jsonl(matrix, "event_vectors.jsonl")
print("wrote event_vectors.jsonl")
