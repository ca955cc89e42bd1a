# Sweep the gate threshold on a single iteration. Small thresholds keep only
# the cleanest samples but discard too much signal; large thresholds keep
# nearly everything while still pruning the worst labels. The "inf" row is
# the baseline without any gated phase.

import dataclasses
import math

from lossgate.config import AblateConfig, CorpusConfig, EvalConfig, RunConfig, Stage1Config, Stage2Config
from lossgate.pipeline import run_ablation

cfg = RunConfig(
    corpus=CorpusConfig(num_speakers=40, utts_per_speaker=50, frames_per_utt=8, feature_dim=6,
                        intra_spread=1.0, inter_spread=1.05),
    stage1=Stage1Config(epochs=10, batch_size=16, segment_len=3),
    stage2=Stage2Config(taus=(6.0,), epochs_plain=5, epochs_gated=5, crop_len=6,
                        batch_size=64, noise_scale=0.2, gain_lo=0.9, gain_hi=1.1),
    ablate=AblateConfig(taus=(4.0, 6.0, 8.0, 10.0, 12.0, math.inf)),
    eval=EvalConfig(num_trials=2000),
    seed=1,
    out_dir="demos/out/sweep",
)

results = run_ablation(cfg, "tau")

print("  tau   EER%    NMI    acc   kept")
for label, report in results.items():
    print(f"{label:>5}  {100 * report.eer:5.2f}  {report.nmi:.3f}  {report.cluster_accuracy:.3f}"
          f"  {report.selection_fraction:5.2f}")
print("\ntable written to demos/out/sweep/ablate_tau.csv")

# The same sweep over the cluster count instead of the threshold:
k_results = run_ablation(dataclasses.replace(cfg, out_dir="demos/out/sweep_k"), "k")
print("\n    k   EER%    NMI    acc")
for label, report in k_results.items():
    print(f"{label:>5}  {100 * report.eer:5.2f}  {report.nmi:.3f}  {report.cluster_accuracy:.3f}")
