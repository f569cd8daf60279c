"""ROI-importance ranking with separate-channel CNN-RNN classifiers."""
