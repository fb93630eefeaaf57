"""
Direct and indirect sets across areas
=====================================

Run the full areal workflow on the bundled ten-area fixture: build a 5-nearest
neighbor graph from centroids, fit a prior per area from its neighbors only,
and compare set sizes.
"""

from pathlib import Path

import predsets
from predsets.pipeline import analyze_all, ingest_records, knn_neighbors, read_centroids, read_records

root = Path(predsets.__file__).parent / "data" / "synthetic10"
data = read_centroids(root / "centroids.csv", ingest_records(read_records(root / "records.csv")))
graph = knn_neighbors(data, k=5)

for alpha in (0.05, 0.2):
    print(f"alpha = {alpha}")
    for r in analyze_all(data, graph, alpha=alpha):
        flag = " (fallback)" if r.fallback else ""
        print(f"  {r.area_id} N={r.N:>5} direct={r.cardinality_direct:>3} indirect={r.cardinality_indirect:>3} ratio={r.ratio:.2f}{flag}")

###############################################################################
# Species on which the two sets disagree, for one small area.

report = analyze_all(data, graph, alpha=0.05)[data.area_index("A02")]
for d in report.disagreements[:8]:
    side = "direct only" if d["in_direct"] else "indirect only"
    top = max(d["neighbor_pct"].values())
    print(f"  {d['species_id']:<6} {side:<13} own={d['own_pct']:.1f}% max neighbor={top:.1f}% gamma={d['gamma']:.2f}")
