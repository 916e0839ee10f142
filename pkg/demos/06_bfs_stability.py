"""Measure how stable the degree-descending BFS ordering is.

Each graph is relabeled at random many times; the BFS rule re-derives a
node order from every relabeling, and rank correlations between the
recovered orders quantify stability. Random orders provide the
baseline.
"""

from perigen import DatasetManifest, bfs_stability, generate_dataset

records = generate_dataset(
    DatasetManifest(counts={"triangle": 7, "grid": 7, "hexagon": 6}, m_max=6, seed=7)
)
report = bfs_stability([r.graph() for r in records], permutations=20, seed=0)

print("rank agreement across 20 random relabelings of 20 graphs:")
print(f"{'scheme':<8} {'spearman':>9} {'kendall':>9}")
print(f"{'bfs':<8} {report.spearman_bfs:>9.4f} {report.kendall_bfs:>9.4f}")
print(f"{'random':<8} {report.spearman_rand:>9.4f} {report.kendall_rand:>9.4f}")
print(f"\nspearman gap: {report.spearman_bfs - report.spearman_rand:.4f} "
      "(degree-descending BFS recovers far more consistent orders than chance)")
