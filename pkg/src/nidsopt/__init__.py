"""Multi-stage optimized ML training framework for binary network intrusion
detection: preprocessing with SMOTE, feature selection, and hyper-parameter
optimization of KNN and random-forest classifiers."""

__version__ = "0.1.0"
