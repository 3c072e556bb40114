"""Brute-force oracles"""
