# Build a synthetic multi-speaker corpus, look at its structure, sample the
# segment pairs used for contrastive views, and construct a verification
# trial list. Everything is driven by one seed, so rerunning reproduces the
# same bytes.

import numpy as np

from lossgate import augment, generate_corpus, load_corpus, make_trials, sample_segments, save_corpus

# A corpus is speakers-by-utterances: every speaker gets a hidden mean vector,
# every frame of every utterance is that mean plus per-frame noise.
corpus = generate_corpus(
    num_speakers=6,
    utts_per_speaker=8,
    frames_per_utt=24,
    feature_dim=5,
    intra_spread=0.6,
    inter_spread=1.5,
    seed=7,
)
print(f"{len(corpus)} utterances, {corpus.num_speakers} speakers, feature dim {corpus.feature_dim}")

utt = corpus.utterances[0]
print(f"utterance {utt.id}: frames {utt.frames.shape}, hidden speaker {utt.truth_speaker}")

# Per-speaker means are visible in the frame averages.
for speaker in range(3):
    members = [u for u in corpus.utterances if u.truth_speaker == speaker]
    mean = np.mean([u.frames.mean(axis=0) for u in members], axis=0)
    print(f"speaker {speaker}: pooled mean {np.round(mean, 2)}")

# Two non-overlapping windows of the same utterance form a positive pair.
rng = np.random.default_rng(0)
seg_a, seg_b = sample_segments(utt, seg_len=8, rng=rng)
print(f"\nsegment pair shapes: {seg_a.shape} vs {seg_b.shape}")

# Augmentation adds gaussian noise and a random gain, preserving the shape.
noisy = augment(seg_a, noise_scale=0.2, gain_range=(0.8, 1.2), rng=rng)
print(f"mean absolute change from augmentation: {np.abs(noisy - seg_a).mean():.3f}")

# Trials are balanced same-speaker / different-speaker pairs.
trials = make_trials(corpus, num_pairs=20, seed=1)
targets = sum(t.is_target for t in trials)
print(f"\n{len(trials)} trials: {targets} target, {len(trials) - targets} nontarget")
print("first three:", [(t.utt_a, t.utt_b, t.is_target) for t in trials[:3]])

# The corpus file round-trips bit-exactly.
save_corpus("/tmp/demo_corpus.bin", corpus)
reloaded = load_corpus("/tmp/demo_corpus.bin")
assert all(np.array_equal(a.frames, b.frames) for a, b in zip(corpus.utterances, reloaded.utterances))
print("\ncorpus file round-trip: exact")
