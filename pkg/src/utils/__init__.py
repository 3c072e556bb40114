"""Utility functions for capture analysis"""
