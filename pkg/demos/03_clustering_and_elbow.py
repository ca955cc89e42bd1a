# Cluster utterance embeddings into pseudo speaker labels and scan the
# within-cluster sum of squares over candidate cluster counts. The flattening
# point of the curve is the usual way to choose the count when the true
# number of speakers is unknown.

import numpy as np

from lossgate import (
    cluster_accuracy,
    elbow_scan,
    encode_batch,
    generate_corpus,
    init_encoder,
    kmeans,
    nmi,
    train_contrastive,
)

TRUE_SPEAKERS = 8

corpus = generate_corpus(
    num_speakers=TRUE_SPEAKERS, utts_per_speaker=20, frames_per_utt=16, feature_dim=5,
    intra_spread=0.7, inter_spread=1.4, seed=11,
)
params = init_encoder([5, 64, 64, 16], seed=1)
params, _ = train_contrastive(
    corpus, params, batch_size=8, epochs=8, lr=1e-3, segment_len=6,
    noise_scale=0.1, gain_range=(0.8, 1.2), rng=np.random.default_rng(2),
)
embeddings, _ = encode_batch(params, corpus.stacked_frames(), want_cache=False)

# Best-of-5 restarts with plus-plus seeding; the objective never increases
# between sweeps of the same run.
result = kmeans(embeddings, TRUE_SPEAKERS, seed=3, restarts=5)
labels = result.label_set.labels
truth = corpus.truth_labels()
print(f"k={TRUE_SPEAKERS}: wcss={result.label_set.wcss:.3f} converged={result.converged}")
print(f"agreement with hidden speakers: accuracy={cluster_accuracy(truth, labels):.3f} "
      f"nmi={nmi(truth, labels):.3f}")

print("\nper-sweep objective:", [round(w, 2) for w in result.wcss_history])

# The elbow scan: one seeded clustering per candidate count.
scan = elbow_scan(embeddings, range(2, 15), seed=3, restarts=5)
print("\n  k   wcss    drop")
prev = None
for k, wcss in scan:
    drop = "" if prev is None else f"{prev - wcss:8.2f}"
    print(f"{k:>3}  {wcss:6.2f} {drop}")
    prev = wcss
print(f"\nthe drop flattens right after k = {TRUE_SPEAKERS}, the true speaker count")
