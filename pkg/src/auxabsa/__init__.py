"""Cross-domain aspect-based sentiment analysis with auxiliary aspect questions.

An aspect detector predicts which aspects a sentence talks about; the
predicted aspects are phrased as a question ("what do you think of food of
the soup?") that conditions a three-way sentiment classifier, which may be
trained on a different domain.
"""

__version__ = "0.1.0"
