r"""
Predicting hulls from frames
----------------------------
Train a small Conv-GRU predictor on synthetic clips, predict the hull of unseen
clips, and turn each prediction into an encode plan. The convexity filter
after encoding removes any predicted point that is not on the hull.

The network here is narrower and the frames smaller than the default so the
script finishes in seconds.
"""
import numpy as np

from ladderforge import rcn
from ladderforge.analysis import classification_metrics
from ladderforge.estimators import execute_and_postprocess, plan_from_prediction
from ladderforge.fixtures import make_corpus
from ladderforge.geometry import ground_truth_hull
from ladderforge.simencoder import default_encoder_model, simulate_grid, simulated_encoder

size = (48, 27)
train = make_corpus(24, seed=1, size=size, frame_count=30)
test = make_corpus(6, seed=2, size=size, frame_count=30, prefix="test")

config = rcn.ModelConfig(channels=(4, 8, 16, 32), input_size=size)
model = rcn.RCNModel(config, seed=0)
print(f"{model.parameter_count()} parameters")

#%%
# Each shot is subsampled every 5th frame and fed in chunks of 3 frames. The
# loss of every chunk is back-propagated on its own, with the hidden state
# carried across as a constant.
cfg = rcn.TrainConfig(batch=8, lr_pretrain=3e-3)
history = rcn.fit(model, train, cfg, epochs=12,
                  callback=lambda e, loss: print(f"epoch {e + 1:2d}  loss {loss:.4f}"))

#%%
# The prediction after the last chunk is thresholded at 0.5.
preds = [rcn.predict_shot(model, s.frames, shot_id=s.shot_id) for s in test]
try:
    m = classification_metrics(preds, [s.target for s in test], n_bootstrap=200)
    print(f"precision {m.precision:.1f}  recall {m.recall:.1f}  F1 {m.f1:.1f}")
except ValueError as exc:
    print("metrics undefined:", exc)

#%%
# Encode only the predicted configs. Missing hull points show up as a positive
# BD-rate against the exhaustive ladder.
encoder_model = default_encoder_model()
for shot, pred in zip(test, preds):
    if not pred.bits.any():
        print(shot.shot_id, "empty prediction")
        continue
    grid, cost = simulate_grid(encoder_model, shot.complexity)
    _, truth = ground_truth_hull(grid)
    ladder, report = execute_and_postprocess(plan_from_prediction(pred), simulated_encoder(encoder_model, shot.complexity),
                                             truth, cost.seconds)
    print(f"{shot.shot_id}: {report.encodes_used:2d} encodes, BD-rate {report.bd_rate_vs_optimal:+.2f}%, "
          f"{np.sum(pred.bits & shot.target.bits)}/{shot.target.bits.sum()} hull cells found")
