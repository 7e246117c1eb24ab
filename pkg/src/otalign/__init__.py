"""Cross-lingual news alignment and return scoring pipeline.

Aligns sentences of bilingual news covering the same stock-day with
entropically regularized optimal transport, aggregates aligned / unaligned /
full sentence embeddings, turns them into return scores with rolling ridge
regressions, and evaluates quantile long-short strategies.
"""

__version__ = "0.1.0"
