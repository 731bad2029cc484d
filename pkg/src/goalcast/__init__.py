"""Goal-based trajectory prediction over dense goal heatmaps.

Pipeline: vectorized scene encoding -> dense goal probability heatmap ->
goal set selection (stochastic optimizer, learned set predictor, or NMS)
-> per-goal trajectory completion. Plus metrics and ablation drivers.
"""

__version__ = "0.1.0"
