"""A desk-scale run of the convergence experiments.

Uses small alphas and few replicas so the whole thing finishes in about a
minute; the Kolmogorov-Smirnov distances to the limit law should already
drift downward along the alpha ladder.  The acceptance suite runs the
production configuration (alphas 5, 8, 11 with 300 replicas each).

Run:  python demos/small_experiment.py
"""

from broxsim import ExperimentConfig, run_env_functional_approx, run_sup_localtime

config = ExperimentConfig(
    alphas=(3.0, 4.0, 5.0),
    replicas=40,
    reference_samples=300,
    seed=2024,
    workers=2,
)

report = run_sup_localtime(config)
print("sup-localtime KS by alpha:")
for alpha, d in report.summary["ks_by_alpha"]:
    print(f"  alpha {alpha:4.1f}: D = {d:.3f}")
print("trend verdict:", report.verdicts["ks_trend"],
      f"({report.wall_clock_seconds:.0f}s)")

# The same replicas are reused; only the statistic changes.
report2 = run_env_functional_approx(config)
print("\nwindowed ratio within 0.5 of one, fraction by alpha:")
for alpha, frac in report2.summary["fractions_by_alpha"]:
    print(f"  alpha {alpha:4.1f}: {frac:.2f}")
print(f"(reusing cached replicas took {report2.wall_clock_seconds:.1f}s)")
