# %% [markdown]
# Place recognition over a small collection
#
# Four rooms, 12 m apart, each seen from two viewpoints. Only the four
# same-room pairs overlap. Every unordered pair is matched once and the
# fitness threshold is swept to trace a precision/recall curve.

# %%
from sdfplace.fixtures import place_collection
from sdfplace.pipeline import PipelineConfig, evaluate_collection

submaps = place_collection()
cfg = PipelineConfig(k_dist=0.05, ransac_iterations=50_000)
ev = evaluate_collection(submaps, cfg)

# %%
for rec in ev.pairs:
    r = rec.result
    if rec.is_match or r.decision.value == "matched":
        print(rec.query_id, rec.target_id, f"overlap {rec.overlap_volume:.1f} m^3", r.decision.value, f"fitness {r.fitness:.4f}")

# %%
print("threshold precision recall")
for p in ev.pr:
    prec = "-" if p.precision is None else f"{p.precision:.3f}"
    print(f"{p.threshold:9.4f} {prec:>9} {p.recall:6.2f}")
print("area under PR:", round(ev.auc(), 3))
