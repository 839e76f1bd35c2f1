"""vexplore: interactive user-group exploration.

Pipeline: ingest CSVs into a token transaction corpus, mine closed frequent
itemsets as user groups, index them by member-set Jaccard similarity, then
explore the group graph k groups at a time under a per-step latency budget,
steered by implicit feedback.
"""

__version__ = "0.1.0"

from .errors import VexploreError

__all__ = ["VexploreError", "__version__"]
