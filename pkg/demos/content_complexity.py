r"""
Spatial and temporal information
--------------------------------
SI and TI of synthetic clips as the spatial and temporal complexity knobs of
the frame generator move.
"""
from ladderforge.analysis import siti
from ladderforge.simencoder import ShotComplexity, default_encoder_model, synth_shot_frames

model = default_encoder_model()
print(" spatial temporal     SI     TI")
for s in (0.5, 1.0, 2.0):
    for t in (0.3, 1.0, 3.0):
        frames = synth_shot_frames(model, ShotComplexity(s, t), 96, 54, 12, seed=5)
        r = siti(frames)
        print(f"{s:8.1f} {t:8.1f} {r.si:6.1f} {r.ti:6.1f}")
