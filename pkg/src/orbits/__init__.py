"""Stable periodic orbits and capture intervals"""
