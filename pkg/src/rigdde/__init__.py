"""Rigorous integration of scalar delay differential equations."""
