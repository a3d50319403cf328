"""Rank-one VLS matrix completion, its consensus lifting and spectral rate bounds."""
