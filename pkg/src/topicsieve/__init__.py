"""topicsieve: refine keyword-retrieved news into hazard-relevant subsets.

Keyword queries over news archives are high-recall and low-precision.
This package fits unsupervised topic models (collapsed-Gibbs LDA,
multiplicative-update NMF) over the retrieved collection and turns them
into binary relevance classifiers by partitioning topics around the
query keywords. Around that core sit the ingestion filters, MinHash
near-duplicate suppression, the hyperparameter sweep with three named
selection strategies, and the evaluation harness.
"""

__version__ = "0.1.0"
