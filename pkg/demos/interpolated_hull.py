r"""
Hull estimation from a reduced QP set
-------------------------------------
Encode five QPs per resolution, interpolate the rest with PCHIP, and encode
only the interpolated points that reach the hull. Compare the result and its
cost with the exhaustive search.
"""
from ladderforge.analysis import corpus_report
from ladderforge.estimators import ihull_estimate
from ladderforge.geometry import ground_truth_hull
from ladderforge.simencoder import EncoderModel, ShotComplexity, simulate_grid, simulated_encoder

model = EncoderModel(noise_amplitude=0.02, noise_seed=4)
reports = []
for t in (0.4, 0.7, 1.0, 1.6, 2.5):
    c = ShotComplexity(1.0, t)
    grid, cost = simulate_grid(model, c)
    _, truth = ground_truth_hull(grid)
    matrix, ladder, report = ihull_estimate(simulated_encoder(model, c), reference=truth,
                                            exhaustive_time=cost.seconds)
    reports.append(report)
    print(f"temporal {t:3.1f}: {report.encodes_used} encodes, "
          f"{report.time_savings:4.1f}% time saved, BD-rate {report.bd_rate_vs_optimal:+.3f}%")

#%%
# Corpus summary with bootstrap intervals on the means.
summary = corpus_report(reports, n_bootstrap=500)
print(summary.to_json())
