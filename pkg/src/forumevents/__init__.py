"""Unsupervised event extraction from online forums.

Pipeline: ingest post logs -> build a user x thread x week activity tensor ->
sparse nonnegative CP decomposition -> cluster extraction -> content/behavior
profiling -> storyline and table summaries.
"""

__version__ = "0.1.0"
