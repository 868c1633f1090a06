"""Semi-supervised nodule detection on synthetic radiograph-like images.

Two-phase workflow: train a small encoder-decoder segmentation network on
labeled images, mine pseudo-negative images from an unlabeled pool with the
trained model, then retrain with transferred weights on the joint set.
Includes FROC evaluation, 5-fold cross-validation, and a negative-source
comparison experiment.
"""

__version__ = "0.1.0"
