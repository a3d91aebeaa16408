"""Binary cross-entropy against the label-correlation term.

BCE treats each aspect on its own. The correlation term compares every
negative aspect with every positive one. It works on probabilities, so a
pair can contribute at most e and at least 1/e.
"""
from auxabsa.detector import bce_loss, combined_loss, lca_loss

labels = [1, 1, 0, 0]
cases = {
    "confident and correct": [0.9, 0.8, 0.1, 0.2],
    "hedged near 0.5": [0.55, 0.6, 0.45, 0.4],
    "one aspect swapped": [0.9, 0.3, 0.6, 0.1],
}

print(f"{'scores':<36}{'bce':>8}{'lca':>8}{'combined':>10}")
for name, scores in cases.items():
    print(f"{name:<36}{float(bce_loss(labels, scores)):>8.4f}{float(lca_loss(labels, scores)):>8.4f}"
          f"{float(combined_loss(labels, scores, alpha=0.2)):>10.4f}")

# With every label on, or every label off, there are no pairs to compare.
print("all positive:", float(lca_loss([1, 1], [0.2, 0.3])))
