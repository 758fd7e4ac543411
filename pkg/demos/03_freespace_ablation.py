# %% [markdown]
# How much do free-space keypoints help?
#
# In a corridor junction most structure is two parallel walls, so features
# near the surface are ambiguous. We drop every keypoint farther than d_lim
# from the nearest surface and compare the area under the PR curve.

# %%
import math

from sdfplace.fixtures import corridor_collection
from sdfplace.pipeline import PipelineConfig, ablate_freespace

submaps = corridor_collection()
cfg = PipelineConfig(k_dist=0.05, ransac_iterations=50_000)
results = ablate_freespace(submaps, cfg, d_lims=(0.15, 0.05))

# %%
for d_lim, ev in results.items():
    label = "none" if math.isinf(d_lim) else f"{d_lim:.2f} m"
    tp = sum(r.is_match and r.pose_ok and r.result.decision.value == "matched" for r in ev.pairs)
    print(f"d_lim {label:>7}: AUPR {ev.auc():.3f}, matched at default threshold {tp}")
