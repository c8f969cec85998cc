import numpy as np


def shannon_entropy(text: str) -> float:
    """Character-level Shannon entropy in bits per character. The empty string has entropy 0."""
    if not text:
        return 0.0

    _, counts = np.unique(np.array(list(text)), return_counts=True)
    probabilities = counts / len(text)
    return float(-np.sum(probabilities * np.log2(probabilities)))


__all__ = ["shannon_entropy"]
