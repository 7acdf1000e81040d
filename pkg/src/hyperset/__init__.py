"""Hypergraph representation learning for edge-dependent node classification.

Pipeline: centrality features -> within-hyperedge rank encodings -> induced
set attention message passing -> per-(node, hyperedge) classification, plus
a random-walk ranking aggregator over the predicted labels.
"""

__version__ = "0.1.0"
