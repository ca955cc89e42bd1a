# Pretrain the embedding network with the segment-pair contrastive loss and
# watch verification quality improve without using any labels.

import numpy as np

from lossgate import (
    eer,
    encode_batch,
    generate_corpus,
    init_encoder,
    make_trials,
    train_contrastive,
)

corpus = generate_corpus(
    num_speakers=12, utts_per_speaker=15, frames_per_utt=16, feature_dim=5,
    intra_spread=0.9, inter_spread=1.1, seed=3,
)
trials = make_trials(corpus, 400, seed=4)


def trial_eer(params):
    emb, _ = encode_batch(params, corpus.stacked_frames(), want_cache=False)
    a = np.array([t.utt_a for t in trials])
    b = np.array([t.utt_b for t in trials])
    scores = np.sum(emb[a] * emb[b], axis=1)
    rate, _ = eer(scores, [t.is_target for t in trials])
    return rate


params = init_encoder([5, 64, 64, 32], seed=0)
print(f"random-init encoder EER: {100 * trial_eer(params):.2f}%")

# Each batch takes two augmented, non-overlapping windows per utterance; the
# loss attracts same-utterance views and repels everything else. There is no
# temperature; the learning rate shrinks 5% every 5 epochs.
params, history = train_contrastive(
    corpus,
    params,
    batch_size=12,
    epochs=12,
    lr=1e-3,
    segment_len=6,
    noise_scale=0.1,
    gain_range=(0.8, 1.2),
    rng=np.random.default_rng(5),
)

print("\nepoch  mean_loss        lr")
for row in history:
    print(f"{row['epoch']:>5}  {row['mean_loss']:.4f}   {row['lr']:.6f}")

print(f"\npretrained encoder EER: {100 * trial_eer(params):.2f}%")
