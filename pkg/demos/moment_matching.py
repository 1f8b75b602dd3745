"""What the decorrelated moment penalty buys at small sample sizes.

Trains the backbone GAN and the moment-matched variant on the same small
training subset, then compares marginal fidelity. The penalty directly
pulls the generator's per-dimension means and spreads toward the real
batch statistics (measured after a decorrelating rotation), which shows
up most clearly in histogram intersection when data is scarce.

Also demonstrates the ablation switch: `ctgan-raw` applies the same
penalty without the rotation, isolating the contribution of
decorrelation itself.
"""

import numpy as np

from margctgan import (
    MixtureColumn,
    PriorColumn,
    TargetRule,
    ToySpec,
    TrainConfig,
    evaluate,
    split,
    subsample,
    toy_dataset,
    train,
)

spec = ToySpec(
    numericals=(MixtureColumn("balance", means=(-2.0, 2.0), stds=(0.3, 0.3), weights=(0.5, 0.5)),),
    categoricals=(
        PriorColumn("region", ("north", "south", "west"), (0.5, 0.3, 0.2)),
        PriorColumn("label", ("neg", "pos"), (0.5, 0.5)),
    ),
    rule=TargetRule("label", "balance", (0.0,), 0.05),
    target="label",
)
table = toy_dataset(spec, 1500, seed=11)
train_table, test_table = split(table, 0.33, seed=0)
subset = subsample(train_table, 320, seed=320)
print(f"training every variant on the same {subset.n_rows}-row subset\n")

scores = {}
for variant in ("ctgan", "ctgan-raw", "margctgan"):
    config = TrainConfig(variant=variant, seed=0, epochs=300, batch=160,
                         latent=32, gen_hidden=(64, 64), critic_hidden=(64, 64))
    model = train(subset, config)
    synth = model.sample(2000, np.random.default_rng(0))
    report = evaluate(subset, test_table, synth, seed=0)
    scores[variant] = report.scores
    marg = model.trace["marg"]
    note = "penalty off" if variant == "ctgan" else f"marg loss {marg[0]:.3f} -> {marg[-1]:.3f}"
    print(f"{variant:10s} trained ({note})")

print(f"\n{'metric':32s} {'ctgan':>9s} {'ctgan-raw':>9s} {'margctgan':>9s}")
for name in ("histogram_intersection", "wasserstein_1d", "associations_difference",
             "ml_efficacy"):
    row = " ".join(f"{scores[v][name]:9.4f}" for v in ("ctgan", "ctgan-raw", "margctgan"))
    print(f"{name:32s} {row}")

print("\nhigher is better for histogram intersection and efficacy;")
print("lower is better for the Wasserstein and association gaps.")
