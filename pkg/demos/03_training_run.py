"""Train a small model and watch the three loss terms evolve.

Uses reduced dimensions so the run finishes in well under a minute;
checkpoints land in demos/output/run/ and are reused by the sampling
and traversal demos.
"""

from pathlib import Path

from perigen import DatasetManifest, ModelConfig, TrainConfig, generate_dataset, train

out_dir = Path(__file__).parent / "output" / "run"

records = generate_dataset(
    DatasetManifest(counts={"triangle": 20, "grid": 20, "hexagon": 20}, m_max=5, seed=7)
)
config = TrainConfig(
    epochs=60,
    batch_size=16,
    seed=11,
    checkpoint_every=20,
    model=ModelConfig(hidden=32, clusters=4, local_dim=16, global_dim=16),
)
params, rows = train(config, records, out_dir=out_dir)

print(f"\ntrained {config.epochs} epochs on {len(records)} graphs")
print(f"{'epoch':>5} {'l_rec':>8} {'l_kl':>8} {'l_contra':>10} {'total':>10}")
for row in rows[::10] + [rows[-1]]:
    print(f"{row['epoch']:>5} {row['l_rec']:>8.4f} {row['l_kl']:>8.4f} "
          f"{row['l_contra']:>10.2f} {row['total']:>10.2f}")

ratio = rows[-1]["l_rec"] / rows[0]["l_rec"]
print(f"\nreconstruction loss ratio (final / first epoch): {ratio:.3f}")
print(f"checkpoints in {out_dir}")
