"""Closed forms for Erlang(2, 1) waiting times"""

import numpy as np


def g2(t):
    """Survival probability"""
    return (1.0 + t) * np.exp(-t)


def q2(t):
    """Even-odd jump-count difference"""
    return np.exp(-t) * (np.cos(t) + np.sin(t))


def mu2(t):
    return np.sin(t) / (np.cos(t) + np.sin(t))


MU_POLE = 3 * np.pi / 4
