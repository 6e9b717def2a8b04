"""Print which KPIs matter in each scenario and phase.

    python demos/relevance_matrix.py
"""

from fieldkpi.report import KPI_IDS, relevance_lookup

SYMBOL = {"highly_relevant": "●", "relevant": "◐", "not_relevant": "○"}
columns = [(s, p) for s in ("s1", "s2", "s3") for p in ("p1", "p2")]

# %% One row per KPI, one column per scenario and phase.
print("KPI  " + " ".join(f"{s}/{p}" for s, p in columns))
for k in KPI_IDS:
    print(f"{k:<4} " + " ".join(f"{SYMBOL[relevance_lookup(s, p, k)]:^5}" for s, p in columns))

# %% A whole-mission report uses the stronger of the two phase ratings.
print("\nP4 over the full s1 mission:", relevance_lookup("s1", "full", "P4"))
