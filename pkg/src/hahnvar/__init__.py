"""Hahn quantum calculus and its variational layer."""

from __future__ import annotations

__version__ = "0.1.0"
