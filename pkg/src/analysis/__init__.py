"""Extrema tables and capture sets"""
